"""Detection evaluation: matching, precision/recall/F1, PR curves, AP, mAP and AR@k.

Matching rule, applied per image and per class:

1. Detections are visited in descending score order; equal scores keep
   their input order.
2. A detection is a true positive when some not-yet-matched, non-difficult
   ground truth of its class overlaps it with IoU at or above the threshold
   (``>`` when ``comparison=">"``); it claims the one with the highest IoU,
   the lowest index winning ties.
3. Otherwise, if it reaches the threshold against a difficult ground truth,
   it is ignored: neither true nor false positive.
4. Anything else is a false positive. Non-difficult ground truths left
   unmatched are false negatives; difficult ones are never counted.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .annotations import GroundTruthObject, ImageAnnotation
from .errors import EmptyCurveError, InputError
from .geometry import BoundingBox, area, iou

STRATA = ("all", "small", "medium", "large")
SMALL_MAX_AREA = 32 ** 2
MEDIUM_MAX_AREA = 96 ** 2
COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_name: str
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InputError(f"detection score {self.score} outside [0, 1]")


class Verdict(str, enum.Enum):
    TP = "TP"
    FP = "FP"
    IGNORED = "ignored"


class GTVerdict(str, enum.Enum):
    MATCHED = "matched"
    FN = "FN"
    IGNORED = "ignored"


@dataclass(frozen=True)
class MatchResult:
    """Verdicts aligned with the input detection and ground-truth lists."""

    detections: Tuple[Verdict, ...]
    matched_gt: Tuple[Optional[int], ...]
    ground_truths: Tuple[GTVerdict, ...]

    @property
    def tp(self) -> int:
        return sum(v is Verdict.TP for v in self.detections)

    @property
    def fp(self) -> int:
        return sum(v is Verdict.FP for v in self.detections)

    @property
    def fn(self) -> int:
        return sum(v is GTVerdict.FN for v in self.ground_truths)

    @property
    def ignored(self) -> int:
        return sum(v is Verdict.IGNORED for v in self.detections)


def _reaches(value, threshold, comparison):
    if comparison == ">=":
        return value >= threshold
    if comparison == ">":
        return value > threshold
    raise InputError(f"comparison must be '>=' or '>', got {comparison!r}")


def score_order(scores: Sequence[float]) -> List[int]:
    """Indices sorted by descending score, ties by ascending index."""
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def _greedy_match(det_boxes, det_scores, gt_boxes, gt_ignore, threshold, comparison):
    """Core single-class matcher. Returns (det verdicts, matched gt index per det)."""
    verdicts = [Verdict.FP] * len(det_boxes)
    matched_to: List[Optional[int]] = [None] * len(det_boxes)
    taken = [False] * len(gt_boxes)
    for d in score_order(det_scores):
        best, best_iou = None, -1.0
        hits_ignored = False
        for g, gt_box in enumerate(gt_boxes):
            overlap = iou(det_boxes[d], gt_box)
            if not _reaches(overlap, threshold, comparison):
                continue
            if gt_ignore[g]:
                hits_ignored = True
            elif not taken[g] and overlap > best_iou:
                best, best_iou = g, overlap
        if best is not None:
            taken[best] = True
            verdicts[d] = Verdict.TP
            matched_to[d] = best
        elif hits_ignored:
            verdicts[d] = Verdict.IGNORED
    return verdicts, matched_to, taken


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthObject],
    image_id: str,
    iou_threshold: float = 0.5,
    comparison: str = ">=",
) -> MatchResult:
    """Match one image's detections against its ground truths, class by class."""
    if not 0.0 < iou_threshold < 1.0:
        raise InputError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    stray = sorted({d.image_id for d in dets if d.image_id != image_id})
    if stray:
        raise InputError(f"detections for image {image_id!r} include other image ids: {stray}")

    det_verdicts: List[Verdict] = [Verdict.FP] * len(dets)
    matched: List[Optional[int]] = [None] * len(dets)
    gt_verdicts = [GTVerdict.IGNORED if g.difficult else GTVerdict.FN for g in gts]

    for cls in sorted({d.class_name for d in dets} | {g.class_name for g in gts}):
        d_idx = [i for i, d in enumerate(dets) if d.class_name == cls]
        g_idx = [i for i, g in enumerate(gts) if g.class_name == cls]
        verdicts, matched_to, taken = _greedy_match(
            [dets[i].box for i in d_idx],
            [dets[i].score for i in d_idx],
            [gts[i].box for i in g_idx],
            [gts[i].difficult for i in g_idx],
            iou_threshold,
            comparison,
        )
        for local, i in enumerate(d_idx):
            det_verdicts[i] = verdicts[local]
            if matched_to[local] is not None:
                matched[i] = g_idx[matched_to[local]]
        for local, i in enumerate(g_idx):
            if taken[local]:
                gt_verdicts[i] = GTVerdict.MATCHED
    return MatchResult(tuple(det_verdicts), tuple(matched), tuple(gt_verdicts))


# ---------------------------------------------------------------------------
# Scalar metrics


def precision(tp: int, fp: int) -> float:
    """TP / (TP + FP); 0 when there are no detections."""
    return tp / (tp + fp) if tp + fp else 0.0


def recall(tp: int, fn: int) -> float:
    """TP / (TP + FN); 1 when there is nothing to find."""
    return tp / (tp + fn) if tp + fn else 1.0


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


# ---------------------------------------------------------------------------
# PR curves and AP


@dataclass(frozen=True)
class PRCurve:
    recall: Tuple[float, ...]
    precision: Tuple[float, ...]
    thresholds: Tuple[float, ...]
    n_positives: int

    def __len__(self):
        return len(self.recall)

    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.recall, self.precision))

    def to_csv(self) -> str:
        lines = ["threshold,recall,precision"]
        lines += [f"{t:.6g},{r:.6g},{p:.6g}" for t, r, p in zip(self.thresholds, self.recall, self.precision)]
        return "\n".join(lines) + "\n"


def _group_by_image(items, key):
    out = defaultdict(list)
    for i, item in enumerate(items):
        out[key(item)].append(i)
    return out


def _class_verdicts(dets, gts_by_image, iou_threshold, comparison):
    """Verdict per detection (input order) for single-class data spread over images."""
    verdicts: List[Verdict] = [Verdict.FP] * len(dets)
    for image_id, idx in _group_by_image(dets, lambda d: d.image_id).items():
        gts = gts_by_image.get(image_id, ())
        result = match_detections([dets[i] for i in idx], gts, image_id, iou_threshold, comparison)
        for local, i in enumerate(idx):
            verdicts[i] = result.detections[local]
    return verdicts


def _curve_from_verdicts(scores, verdicts, n_positives):
    tp = fp = 0
    recalls, precisions, thresholds = [], [], []
    for i in score_order(scores):
        if verdicts[i] is Verdict.IGNORED:
            continue
        if verdicts[i] is Verdict.TP:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / n_positives)
        precisions.append(tp / (tp + fp))
        thresholds.append(scores[i])
    return PRCurve(tuple(recalls), tuple(precisions), tuple(thresholds), n_positives)


def pr_curve(
    dets: Sequence[Detection],
    gts: Mapping[str, Sequence[GroundTruthObject]],
    iou_threshold: float = 0.5,
    comparison: str = ">=",
) -> PRCurve:
    """Precision/recall after each detection of one class, in global score order.

    ``gts`` maps image id to that image's ground truths of the same class.
    Ignored detections (matched only to difficult objects) contribute no point.

    Raises:
        EmptyCurveError: there is no non-difficult ground truth to recall.
    """
    classes = {d.class_name for d in dets} | {g.class_name for objs in gts.values() for g in objs}
    if len(classes) > 1:
        raise InputError(f"pr_curve expects a single class, got {sorted(classes)}")
    n_pos = sum(not g.difficult for objs in gts.values() for g in objs)
    if n_pos == 0:
        raise EmptyCurveError("class has no non-difficult ground truth")
    verdicts = _class_verdicts(dets, gts, iou_threshold, comparison)
    return _curve_from_verdicts([d.score for d in dets], verdicts, n_pos)


def precision_envelope(precisions: Sequence[float]) -> np.ndarray:
    """Running maximum from the right: the best precision at this recall or beyond."""
    p = np.asarray(precisions, dtype=np.float64)
    if p.size == 0:
        return p
    return np.maximum.accumulate(p[::-1])[::-1]


def average_precision(curve: PRCurve, mode: str = "continuous") -> float:
    """Area under the precision envelope.

    ``continuous`` integrates the envelope stepwise over every recall
    increment; ``eleven_point`` averages it at recall 0, 0.1, ..., 1.0. A curve
    without points (no detections) scores 0.
    """
    r = np.asarray(curve.recall, dtype=np.float64)
    env = precision_envelope(curve.precision)
    if mode == "continuous":
        if r.size == 0:
            return 0.0
        steps = np.diff(np.concatenate(([0.0], r)))
        return float(np.sum(steps * env))
    if mode == "eleven_point":
        total = 0.0
        for level in np.linspace(0.0, 1.0, 11):
            above = env[r >= level - 1e-12]
            total += float(above.max()) if above.size else 0.0
        return total / 11.0
    raise InputError(f"unknown AP mode {mode!r}")


def mean_average_precision(per_class_ap: Mapping[str, Optional[float]]) -> float:
    """Unweighted mean over classes; ``None`` entries (no ground truth) are skipped."""
    values = [v for v in per_class_ap.values() if v is not None]
    if not values:
        raise InputError("mAP needs at least one class with ground truth")
    return float(sum(values) / len(values))


# ---------------------------------------------------------------------------
# Recall at k, size strata


def stratify_by_size(gt) -> str:
    """COCO size bucket of a ground truth (or a bare pixel-space box)."""
    a = area(gt.box if isinstance(gt, GroundTruthObject) else gt)
    if a < SMALL_MAX_AREA:
        return "small"
    if a <= MEDIUM_MAX_AREA:
        return "medium"
    return "large"


def _in_stratum(gt, stratum):
    return stratum == "all" or stratify_by_size(gt) == stratum


def _index_annotations(anns):
    by_image = {}
    for ann in anns:
        if ann.filename in by_image:
            raise InputError(f"duplicate annotation for image {ann.filename!r}")
        by_image[ann.filename] = ann
    return by_image


def _check_ids(dets, by_image):
    unknown = sorted({d.image_id for d in dets} - set(by_image))
    if unknown:
        raise InputError(f"detections reference unknown image ids: {unknown}")


def average_recall_at_k(
    dets: Sequence[Detection],
    anns: Sequence[ImageAnnotation],
    k: int = 100,
    iou_thresholds: Iterable[float] = (0.5,),
    stratum: str = "all",
    comparison: str = ">=",
) -> float:
    """Recall when each image keeps only its ``k`` best detections per class.

    Recall is computed per class and IoU threshold over the non-difficult
    ground truths inside ``stratum`` and averaged over both. Ground truths
    outside the stratum are treated like difficult ones so a detection on
    them is neither rewarded nor punished. Returns -1 when the stratum holds
    no ground truth at all.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if stratum not in STRATA:
        raise InputError(f"unknown stratum {stratum!r}")
    thresholds = tuple(iou_thresholds)
    if not thresholds:
        raise InputError("need at least one IoU threshold")
    by_image = _index_annotations(anns)
    _check_ids(dets, by_image)

    classes = sorted({g.class_name for a in anns for g in a.objects if not g.difficult and _in_stratum(g, stratum)})
    if not classes:
        return -1.0

    recalls = []
    for cls in classes:
        for thr in thresholds:
            tp = n_pos = 0
            for image_id, ann in by_image.items():
                gts = [g for g in ann.objects if g.class_name == cls]
                ignore = [g.difficult or not _in_stratum(g, stratum) for g in gts]
                n_pos += sum(not x for x in ignore)
                cls_dets = [d for d in dets if d.image_id == image_id and d.class_name == cls]
                top = [cls_dets[i] for i in score_order([d.score for d in cls_dets])[:k]]
                if not gts or not top:
                    continue
                verdicts, _, _ = _greedy_match(
                    [d.box for d in top], [d.score for d in top], [g.box for g in gts], ignore, thr, comparison
                )
                tp += sum(v is Verdict.TP for v in verdicts)
            recalls.append(tp / n_pos)
    return float(np.mean(recalls))


# ---------------------------------------------------------------------------
# Dataset report


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    comparison: str = ">="
    ap_mode: str = "continuous"
    k: int = 100
    ar_iou_thresholds: Optional[Tuple[float, ...]] = None
    strata: Tuple[str, ...] = STRATA

    def __post_init__(self):
        if not 0.0 < self.iou_threshold < 1.0:
            raise InputError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        if self.comparison not in (">=", ">"):
            raise InputError(f"comparison must be '>=' or '>', got {self.comparison!r}")
        if self.ap_mode not in ("continuous", "eleven_point"):
            raise InputError(f"unknown AP mode {self.ap_mode!r}")
        if self.k < 1:
            raise InputError("k must be >= 1")
        unknown = set(self.strata) - set(STRATA)
        if unknown:
            raise InputError(f"unknown strata {sorted(unknown)}")

    @property
    def recall_thresholds(self) -> Tuple[float, ...]:
        return self.ar_iou_thresholds or (self.iou_threshold,)


@dataclass(frozen=True)
class ClassReport:
    tp: int
    fp: int
    fn: int
    ignored: int
    n_ground_truth: int
    precision: float
    recall: float
    f1: float
    ap: Optional[float]
    curve: Optional[PRCurve]


@dataclass(frozen=True)
class EvaluationReport:
    classes: Dict[str, ClassReport]
    mean_ap: float
    average_recall: Dict[str, float]
    config: EvalConfig
    totals: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        classes = {}
        for name, c in self.classes.items():
            classes[name] = {
                "tp": c.tp, "fp": c.fp, "fn": c.fn, "ignored": c.ignored,
                "n_ground_truth": c.n_ground_truth,
                "precision": c.precision, "recall": c.recall, "f1": c.f1, "ap": c.ap,
                "pr_curve": None if c.curve is None else {
                    "recall": list(c.curve.recall),
                    "precision": list(c.curve.precision),
                    "thresholds": list(c.curve.thresholds),
                },
            }
        return {
            "config": {
                "iou_threshold": self.config.iou_threshold,
                "comparison": self.config.comparison,
                "ap_mode": self.config.ap_mode,
                "k": self.config.k,
                "ar_iou_thresholds": list(self.config.recall_thresholds),
                "conventions": {
                    "precision_no_detections": 0.0,
                    "recall_no_ground_truth": 1.0,
                    "f1_zero": 0.0,
                    "empty_stratum": -1.0,
                },
            },
            "mAP": self.mean_ap,
            f"AR@{self.config.k}": dict(self.average_recall),
            "totals": dict(self.totals),
            "classes": classes,
        }


def evaluate_dataset(
    dets: Sequence[Detection],
    anns: Sequence[ImageAnnotation],
    config: EvalConfig = EvalConfig(),
) -> EvaluationReport:
    """Full report over a dataset. ``mean_ap`` is -1 if no class has ground truth."""
    by_image = _index_annotations(anns)
    _check_ids(dets, by_image)

    verdicts: List[Verdict] = [Verdict.FP] * len(dets)
    per_class = defaultdict(lambda: {"fn": 0, "n_gt": 0})
    for image_id, ann in by_image.items():
        idx = [i for i, d in enumerate(dets) if d.image_id == image_id]
        result = match_detections([dets[i] for i in idx], ann.objects, image_id, config.iou_threshold, config.comparison)
        for local, i in enumerate(idx):
            verdicts[i] = result.detections[local]
        for g, v in zip(ann.objects, result.ground_truths):
            per_class[g.class_name]["fn"] += v is GTVerdict.FN
            per_class[g.class_name]["n_gt"] += not g.difficult

    classes = {}
    for cls in sorted(set(per_class) | {d.class_name for d in dets}):
        idx = [i for i, d in enumerate(dets) if d.class_name == cls]
        v = [verdicts[i] for i in idx]
        tp = sum(x is Verdict.TP for x in v)
        fp = sum(x is Verdict.FP for x in v)
        ignored = len(v) - tp - fp
        fn = per_class[cls]["fn"] if cls in per_class else 0
        n_gt = per_class[cls]["n_gt"] if cls in per_class else 0
        p, r = precision(tp, fp), recall(tp, fn)
        curve = ap = None
        if n_gt:
            curve = _curve_from_verdicts([dets[i].score for i in idx], v, n_gt)
            ap = average_precision(curve, config.ap_mode)
        classes[cls] = ClassReport(tp, fp, fn, ignored, n_gt, p, r, f1(p, r), ap, curve)

    aps = {c: r.ap for c, r in classes.items()}
    mean_ap = mean_average_precision(aps) if any(a is not None for a in aps.values()) else -1.0
    ar = {
        s: average_recall_at_k(dets, anns, config.k, config.recall_thresholds, s, config.comparison)
        for s in config.strata
    }
    totals = {
        "tp": sum(c.tp for c in classes.values()),
        "fp": sum(c.fp for c in classes.values()),
        "fn": sum(c.fn for c in classes.values()),
        "ignored": sum(c.ignored for c in classes.values()),
        "n_ground_truth": sum(c.n_ground_truth for c in classes.values()),
        "n_detections": len(dets),
    }
    return EvaluationReport(classes, mean_ap, ar, config, totals)
