"""Independent reference implementations used only by the tests.

None of these import detkit internals; they recompute the same quantities
by different means (pixel enumeration, bitwise CRC, exact rational
arithmetic, explicit sorting).
"""

from fractions import Fraction

import numpy as np


def pixel_iou(a, b, grid=64):
    """IoU of integer boxes ``(x0, y0, x1, y1)`` by counting unit cells."""
    ma = np.zeros((grid, grid), dtype=bool)
    mb = np.zeros((grid, grid), dtype=bool)
    ma[a[1]:a[3], a[0]:a[2]] = True
    mb[b[1]:b[3], b[0]:b[2]] = True
    union = np.count_nonzero(ma | mb)
    return np.count_nonzero(ma & mb) / union


def crc32c_bitwise(data: bytes) -> int:
    """CRC-32C straight from the polynomial definition (non-reflected loop on reversed bits)."""
    poly = 0x1EDC6F41
    crc = 0xFFFFFFFF
    for byte in data:
        rev = int(f"{byte:08b}"[::-1], 2)
        crc ^= rev << 24
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFFFFFFFF if crc & 0x80000000 else (crc << 1) & 0xFFFFFFFF
    crc = int(f"{crc:032b}"[::-1], 2)
    return crc ^ 0xFFFFFFFF


def masked(crc: int) -> int:
    return (((crc >> 15) | (crc << 17)) + 0xA282EAD8) % (1 << 32)


def exact_iou(a, b):
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = Fraction(ix) * iy
    union = Fraction(a[2] - a[0]) * (a[3] - a[1]) + Fraction(b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def brute_force_eval(images, threshold=Fraction(1, 2)):
    """Greedy matching and AP on plain tuples with exact arithmetic.

    ``images``: list of dicts with ``gts`` = [(cls, box, difficult)] and
    ``dets`` = [(cls, box, score)]; boxes are integer tuples.

    Returns ``{cls: {"tp", "fp", "fn", "ap"}}`` for every class seen, with
    ``ap`` None when the class has no non-difficult ground truth.
    """
    classes = sorted({g[0] for im in images for g in im["gts"]} | {d[0] for im in images for d in im["dets"]})
    out = {}
    for cls in classes:
        scored = []  # (score, global index, verdict)
        fn = 0
        n_pos = 0
        counter = 0
        for im in images:
            gts = [g for g in im["gts"] if g[0] == cls]
            n_pos += sum(1 for g in gts if not g[2])
            dets = [(d, counter + i) for i, d in enumerate(im["dets"])]
            counter += len(im["dets"])
            mine = sorted([x for x in dets if x[0][0] == cls], key=lambda x: (-x[0][2], x[1]))
            used = set()
            for det, gidx in mine:
                options = []
                ignored_hit = False
                for j, g in enumerate(gts):
                    v = exact_iou(det[1], g[1])
                    if v >= threshold:
                        if g[2]:
                            ignored_hit = True
                        elif j not in used:
                            options.append((-v, j))
                if options:
                    options.sort()
                    used.add(options[0][1])
                    scored.append((det[2], gidx, "TP"))
                elif ignored_hit:
                    scored.append((det[2], gidx, "IGN"))
                else:
                    scored.append((det[2], gidx, "FP"))
            fn += sum(1 for j, g in enumerate(gts) if not g[2] and j not in used)
        tp = sum(1 for s in scored if s[2] == "TP")
        fp = sum(1 for s in scored if s[2] == "FP")
        ap = None
        if n_pos:
            ranked = sorted([s for s in scored if s[2] != "IGN"], key=lambda s: (-s[0], s[1]))
            pts = []
            c_tp = c_fp = 0
            for s in ranked:
                c_tp += s[2] == "TP"
                c_fp += s[2] == "FP"
                pts.append((Fraction(c_tp, n_pos), Fraction(c_tp, c_tp + c_fp)))
            levels = sorted({r for r, _ in pts})
            ap = Fraction(0)
            prev = Fraction(0)
            for lvl in levels:
                best = max(p for r, p in pts if r >= lvl)
                ap += (lvl - prev) * best
                prev = lvl
        out[cls] = {"tp": tp, "fp": fp, "fn": fn, "ap": ap}
    return out
