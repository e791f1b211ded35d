"""Dependency-free SVG line charts.

Output is deterministic: fixed viewBox, numbers printed with 6 significant
digits, series drawn in input order.
"""

from __future__ import annotations

from typing import Mapping, Sequence, Tuple
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 140, 36, 48


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _span(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_chart(
    series: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    x_range=None,
    y_range=None,
    step: bool = False,
) -> str:
    """Render ``{name: (xs, ys)}`` as a standalone SVG document."""
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    x0, x1 = x_range or (_span(xs_all) if xs_all else (0.0, 1.0))
    y0, y1 = y_range or (_span(ys_all) if ys_all else (0.0, 1.0))
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.6g}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(f'<line x1="{_fmt(px(fx))}" y1="{MARGIN_T + ph}" x2="{_fmt(px(fx))}" y2="{MARGIN_T + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(px(fx))}" y="{MARGIN_T + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{_fmt(fx)}</text>')
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(py(fy))}" x2="{MARGIN_L}" y2="{_fmt(py(fy))}" stroke="#444"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_fmt(py(fy) + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{_fmt(fy)}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.6g}" y="{HEIGHT - 8}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(x_label)}</text>')
    out.append(
        f'<text x="14" y="{MARGIN_T + ph / 2:.6g}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {MARGIN_T + ph / 2:.6g})">{escape(y_label)}</text>'
    )

    for n, (name, (xs, ys)) in enumerate(series.items()):
        color = PALETTE[n % len(PALETTE)]
        pts = []
        prev_y = None
        for x, y in zip(xs, ys):
            if step and prev_y is not None:
                pts.append(f"{_fmt(px(x))},{_fmt(py(prev_y))}")
            pts.append(f"{_fmt(px(x))},{_fmt(py(y))}")
            prev_y = y
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        ly = MARGIN_T + 14 + 18 * n
        lx = WIDTH - MARGIN_R + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 24}" y="{ly}" font-family="sans-serif" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pr_curve_svg(curve, title: str = "Precision-recall") -> str:
    return line_chart(
        {"precision": (list(curve.recall), list(curve.precision))},
        title=title, x_label="recall", y_label="precision",
        x_range=(0.0, 1.0), y_range=(0.0, 1.0), step=True,
    )


def loss_curve_svg(steps, raw, smoothed, title: str) -> str:
    return line_chart(
        {"raw": (list(steps), list(raw)), "smoothed": (list(steps), list(smoothed))},
        title=title, x_label="step", y_label="loss",
    )
