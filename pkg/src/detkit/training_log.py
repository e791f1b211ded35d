"""Summaries of training loss logs (classification, localization, total)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import LogFormatError

LOSS_COLUMNS = ("classification_loss", "localization_loss", "total_loss")
LOG_HEADER = ["step", *LOSS_COLUMNS]


@dataclass(frozen=True)
class LossLog:
    steps: Tuple[int, ...]
    classification_loss: Tuple[float, ...]
    localization_loss: Tuple[float, ...]
    total_loss: Tuple[float, ...]

    def __post_init__(self):
        n = len(self.steps)
        if any(len(getattr(self, c)) != n for c in LOSS_COLUMNS):
            raise LogFormatError("all loss columns must have one value per step")
        for i in range(1, n):
            if self.steps[i] <= self.steps[i - 1]:
                raise LogFormatError(f"steps must be strictly increasing: {self.steps[i - 1]} then {self.steps[i]}", row=i + 2)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=np.float64)


def parse_loss_csv(text: str) -> LossLog:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != LOG_HEADER:
        raise LogFormatError(f"loss log header must be {','.join(LOG_HEADER)}, got {header}", row=1)
    cols = {name: [] for name in LOG_HEADER}
    for lineno, fields in enumerate(reader, start=2):
        if not fields:
            continue
        if len(fields) != 4:
            raise LogFormatError(f"expected 4 fields, got {len(fields)}", row=lineno)
        try:
            step = int(fields[0])
            losses = [float(v) for v in fields[1:]]
        except ValueError as exc:
            raise LogFormatError(str(exc), row=lineno) from None
        if any(v < 0 or not math.isfinite(v) for v in losses):
            raise LogFormatError("losses must be finite and non-negative", row=lineno)
        if cols["step"] and step <= cols["step"][-1]:
            raise LogFormatError(f"step {step} does not increase", row=lineno)
        cols["step"].append(step)
        for name, v in zip(LOSS_COLUMNS, losses):
            cols[name].append(v)
    return LossLog(tuple(cols["step"]), *(tuple(cols[c]) for c in LOSS_COLUMNS))


def ema(values: np.ndarray, smoothing: float) -> np.ndarray:
    """Exponential moving average seeded with the first value.

    ``smoothed[i] = smoothing * smoothed[i-1] + (1 - smoothing) * values[i]``.
    """
    if not 0.0 <= smoothing < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {smoothing}")
    out = np.empty(len(values), dtype=np.float64)
    last = None
    for i, v in enumerate(values):
        last = v if last is None else smoothing * last + (1.0 - smoothing) * v
        out[i] = last
    return out


def summarize_loss_log(log: LossLog, smoothing: float = 0.6, threshold: float = 0.01) -> Dict:
    """Smoothed curves and headline numbers for each loss column.

    ``converged`` is true when the smoothed total loss at the last step is at
    or below ``threshold``.
    """
    if not log.steps:
        raise LogFormatError("loss log is empty")
    summary = {"steps": list(log.steps), "smoothing": smoothing, "threshold": threshold, "columns": {}}
    for name in LOSS_COLUMNS:
        raw = log.column(name)
        smooth = ema(raw, smoothing)
        i_min = int(np.argmin(raw))
        summary["columns"][name] = {
            "smoothed": smooth.tolist(),
            "final_raw": float(raw[-1]),
            "final_smoothed": float(smooth[-1]),
            "min": float(raw[i_min]),
            "min_step": int(log.steps[i_min]),
        }
    summary["converged"] = bool(summary["columns"]["total_loss"]["final_smoothed"] <= threshold)
    return summary
