"""Seeded image + bounding-box augmentation.

Images are ``float64`` arrays of shape ``(height, width, channels)`` with
values in ``[0, 1]`` and 1 or 3 channels; :func:`to_float` and
:func:`to_uint8` convert from and to 8-bit storage. Boxes are lists of
pixel-space :class:`~detkit.geometry.BoundingBox`.

The geometric primitives (flips, rotation, crop, pad, resize) and the
photometric ones are plain functions. :func:`apply_pipeline` runs a
configured op list where every op draws from its own Philox stream keyed by
``(seed, op_index, image_id)``, so the result for one image does not depend
on which other images were processed before it.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AugmentError, ConfigError, SpaceMismatchError
from .geometry import BoundingBox, CoordinateSpace, ImageSize, area, clip, denormalize

LUMA_PER_MILLE = np.array([299.0, 587.0, 114.0])
DEFAULT_RETAIN_THRESHOLD = 0.25


def to_float(pixels: np.ndarray) -> np.ndarray:
    """8-bit storage (``HxW`` or ``HxWxC``) to an in-pipeline float image."""
    arr = np.asarray(pixels)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ConfigError(f"expected 1 or 3 channels, got shape {arr.shape}")
    return arr.astype(np.float64) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def image_size(img: np.ndarray) -> ImageSize:
    return ImageSize(int(img.shape[1]), int(img.shape[0]))


def _pixel_boxes(boxes):
    for b in boxes:
        if b.space is not CoordinateSpace.PIXEL:
            raise SpaceMismatchError("geometric augmentations need pixel-space boxes")
    return list(boxes)


# ---------------------------------------------------------------------------
# Geometric ops


def flip_horizontal(img, boxes):
    w = img.shape[1]
    out = [BoundingBox(w - b.xmax, b.ymin, w - b.xmin, b.ymax) for b in _pixel_boxes(boxes)]
    return img[:, ::-1].copy(), out


def flip_vertical(img, boxes):
    h = img.shape[0]
    out = [BoundingBox(b.xmin, h - b.ymax, b.xmax, h - b.ymin) for b in _pixel_boxes(boxes)]
    return img[::-1].copy(), out


def rotate90(img, boxes):
    """Rotate 90 degrees counter-clockwise; a point ``(x, y)`` goes to ``(y, W - x)``."""
    w = img.shape[1]
    out = [BoundingBox(b.ymin, w - b.xmax, b.ymax, w - b.xmin) for b in _pixel_boxes(boxes)]
    return np.ascontiguousarray(np.rot90(img, k=1, axes=(0, 1))), out


def _crop_indices(boxes, region, retain_threshold):
    kept = []
    out = []
    for i, b in enumerate(boxes):
        clipped = clip(b, region)
        if clipped is None:
            continue
        original = area(b)
        if original > 0 and area(clipped) / original < retain_threshold:
            continue
        kept.append(i)
        out.append(clipped.translate(-region.xmin, -region.ymin))
    return out, kept


def crop(img, boxes, region: BoundingBox, retain_threshold: float = DEFAULT_RETAIN_THRESHOLD):
    """Crop to ``region`` (integer pixel coordinates inside the image).

    Boxes are clipped to the region and shifted into crop coordinates. A box
    keeping less than ``retain_threshold`` of its area is dropped, as is any
    box that ends up with no overlap at all.
    """
    out, _ = _crop_impl(img, boxes, region, retain_threshold)
    return out


def _crop_impl(img, boxes, region, retain_threshold):
    h, w = img.shape[:2]
    coords = region.as_tuple()
    if any(float(c) != int(c) for c in coords):
        raise ConfigError(f"crop region must use whole pixels, got {coords}")
    x0, y0, x1, y1 = (int(c) for c in coords)
    if x1 <= x0 or y1 <= y0:
        raise ConfigError(f"crop region {coords} is empty")
    if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
        raise ConfigError(f"crop region {coords} outside {w}x{h} image")
    if not 0.0 <= retain_threshold <= 1.0:
        raise ConfigError(f"retain_threshold must be in [0, 1], got {retain_threshold}")
    region = BoundingBox(x0, y0, x1, y1)
    new_boxes, kept = _crop_indices(_pixel_boxes(boxes), region, retain_threshold)
    return (img[y0:y1, x0:x1].copy(), new_boxes), kept


def pad(img, boxes, left: int = 0, top: int = 0, right: int = 0, bottom: int = 0, fill_value=0.0):
    if min(left, top, right, bottom) < 0:
        raise ConfigError("pad amounts must be non-negative")
    h, w, c = img.shape
    fill = np.broadcast_to(np.asarray(fill_value, dtype=np.float64), (c,))
    out = np.empty((h + top + bottom, w + left + right, c), dtype=img.dtype)
    out[...] = np.clip(fill, 0.0, 1.0)
    out[top:top + h, left:left + w] = img
    return out, [b.translate(left, top) for b in _pixel_boxes(boxes)]


def _resize_axis(img, n_out, axis):
    n_in = img.shape[axis]
    if n_in == n_out:
        return img
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    shape = [1, 1, 1]
    shape[axis] = n_out
    frac = frac.reshape(shape)
    return np.take(img, lo, axis=axis) * (1.0 - frac) + np.take(img, hi, axis=axis) * frac


def resize(img, boxes, target: ImageSize):
    """Bilinear resample (half-pixel centres) with boxes scaled to match."""
    h, w = img.shape[:2]
    out = _resize_axis(_resize_axis(img, target.height, 0), target.width, 1)
    # multiply before dividing so a box edge on the border lands exactly on it
    scaled = [
        BoundingBox(
            b.xmin * target.width / w,
            b.ymin * target.height / h,
            b.xmax * target.width / w,
            b.ymax * target.height / h,
        )
        for b in _pixel_boxes(boxes)
    ]
    return np.clip(out, 0.0, 1.0), scaled


# ---------------------------------------------------------------------------
# Photometric ops


def _channel_values(value, channels, name):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(channels, float(arr))
    if arr.shape != (channels,):
        raise ConfigError(f"{name} needs 1 or {channels} values, got {arr.tolist()}")
    return arr


def photometric(img, kind: str, **params):
    """Per-pixel colour transforms. Output is always clamped to ``[0, 1]``.

    Kinds and their parameters:

    - ``brightness``: ``delta`` added to every value.
    - ``contrast``: ``factor`` applied around each channel's mean.
    - ``pixel_value_scale``: every value multiplied by ``scale``.
    - ``normalize``: affine map of ``original_minval..original_maxval`` onto
      ``target_minval..target_maxval``.
    - ``subtract_channel_mean``: ``means`` (one per channel) subtracted.
    - ``rgb_to_gray``: luma ``0.299 R + 0.587 G + 0.114 B`` copied to all
      three channels; single-channel images pass through.
    """
    channels = img.shape[2]
    if kind == "brightness":
        out = img + float(params.get("delta", 0.0))
    elif kind == "contrast":
        factor = float(params.get("factor", 1.0))
        if factor < 0:
            raise ConfigError(f"contrast factor must be >= 0, got {factor}")
        mean = img.mean(axis=(0, 1), keepdims=True)
        out = (img - mean) * factor + mean
    elif kind == "pixel_value_scale":
        scale = float(params.get("scale", 1.0))
        if scale < 0:
            raise ConfigError(f"pixel scale must be >= 0, got {scale}")
        out = img * scale
    elif kind == "normalize":
        omin = float(params.get("original_minval", 0.0))
        omax = float(params.get("original_maxval", 1.0))
        tmin = float(params.get("target_minval", 0.0))
        tmax = float(params.get("target_maxval", 1.0))
        if omax <= omin or tmax < tmin:
            raise ConfigError("normalize needs original_minval < original_maxval and target_minval <= target_maxval")
        out = (img - omin) / (omax - omin) * (tmax - tmin) + tmin
    elif kind == "subtract_channel_mean":
        out = img - _channel_values(params.get("means", 0.0), channels, "means")
    elif kind == "rgb_to_gray":
        if channels == 1:
            return img.copy()
        # integer weights over 1000 so white maps to exactly 1.0
        gray = (img @ LUMA_PER_MILLE) / 1000.0
        out = np.repeat(gray[:, :, None], 3, axis=2)
    else:
        raise ConfigError(f"unknown photometric kind {kind!r}")
    return np.clip(out, 0.0, 1.0)


def black_patches(img, max_patches: int, size_fraction: float, rng: np.random.Generator, probability: float = 1.0):
    """Zero out up to ``max_patches`` squares of side ``floor(size_fraction * min(W, H))``.

    Each candidate patch is placed with ``probability``.
    """
    return _black_patches(img, max_patches, size_fraction, rng, probability)[0]


def _black_patches(img, max_patches, size_fraction, rng, probability):
    if not 0.0 < size_fraction <= 1.0:
        raise ConfigError(f"size_fraction must be in (0, 1], got {size_fraction}")
    if max_patches < 0:
        raise ConfigError("max_patches must be >= 0")
    h, w = img.shape[:2]
    side = int(math.floor(size_fraction * min(w, h)))
    out = img.copy()
    placed = []
    for _ in range(max_patches):
        if rng.random() >= probability or side < 1:
            continue
        x = int(rng.integers(0, w - side + 1))
        y = int(rng.integers(0, h - side + 1))
        out[y:y + side, x:x + side] = 0.0
        placed.append((x, y, side))
    return out, placed


# ---------------------------------------------------------------------------
# Pipeline


@dataclass(frozen=True)
class OpSpec:
    default_probability: float
    defaults: Dict[str, object]
    run: Callable


def _uniform(rng, lo, hi):
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def _check_range(params, lo_key, hi_key):
    if params[lo_key] > params[hi_key]:
        raise ConfigError(f"{lo_key} must be <= {hi_key}")


def _op_normalize(img, boxes, rng, p):
    return photometric(img, "normalize", **p), boxes, dict(p)


def _op_flip_h(img, boxes, rng, p):
    return (*flip_horizontal(img, boxes), {})


def _op_flip_v(img, boxes, rng, p):
    return (*flip_vertical(img, boxes), {})


def _op_rot90(img, boxes, rng, p):
    return (*rotate90(img, boxes), {})


def _op_pixel_scale(img, boxes, rng, p):
    _check_range(p, "minval", "maxval")
    s = _uniform(rng, p["minval"], p["maxval"])
    return photometric(img, "pixel_value_scale", scale=s), boxes, {"scale": s}


def _op_image_scale(img, boxes, rng, p):
    _check_range(p, "min_scale_ratio", "max_scale_ratio")
    if p["min_scale_ratio"] <= 0:
        raise ConfigError("min_scale_ratio must be > 0")
    r = _uniform(rng, p["min_scale_ratio"], p["max_scale_ratio"])
    h, w = img.shape[:2]
    target = ImageSize(max(1, round(w * r)), max(1, round(h * r)))
    out, boxes = resize(img, boxes, target)
    return out, boxes, {"ratio": r, "width": target.width, "height": target.height}


def _op_gray(img, boxes, rng, p):
    return photometric(img, "rgb_to_gray"), boxes, {}


def _op_brightness(img, boxes, rng, p):
    if p["max_delta"] < 0:
        raise ConfigError("max_delta must be >= 0")
    d = _uniform(rng, -p["max_delta"], p["max_delta"])
    return photometric(img, "brightness", delta=d), boxes, {"delta": d}


def _op_contrast(img, boxes, rng, p):
    _check_range(p, "min_delta", "max_delta")
    f = _uniform(rng, p["min_delta"], p["max_delta"])
    return photometric(img, "contrast", factor=f), boxes, {"factor": f}


def _op_crop(img, boxes, rng, p):
    _check_range(p, "min_area", "max_area")
    _check_range(p, "min_aspect_ratio", "max_aspect_ratio")
    if not 0 < p["min_area"] <= 1 or p["max_area"] > 1 or p["min_aspect_ratio"] <= 0:
        raise ConfigError("crop areas must lie in (0, 1] and aspect ratios be positive")
    h, w = img.shape[:2]
    region = BoundingBox(0, 0, w, h)
    for _ in range(int(p["max_attempts"])):
        frac = _uniform(rng, p["min_area"], p["max_area"])
        aspect = _uniform(rng, p["min_aspect_ratio"], p["max_aspect_ratio"])
        cw = int(round(math.sqrt(frac * w * h * aspect)))
        ch = int(round(math.sqrt(frac * w * h / aspect)))
        if 1 <= cw <= w and 1 <= ch <= h:
            x0 = int(rng.integers(0, w - cw + 1))
            y0 = int(rng.integers(0, h - ch + 1))
            region = BoundingBox(x0, y0, x0 + cw, y0 + ch)
            break
    (out, new_boxes), kept = _crop_impl(img, boxes, region, p["retain_threshold"])
    return out, new_boxes, {"region": list(region.as_tuple()), "kept": kept}


def _op_pad(img, boxes, rng, p):
    _check_range(p, "min_pad_fraction", "max_pad_fraction")
    if p["min_pad_fraction"] < 0:
        raise ConfigError("pad fractions must be >= 0")
    h, w = img.shape[:2]
    extra_w = int(rng.integers(round(p["min_pad_fraction"] * w), round(p["max_pad_fraction"] * w) + 1))
    extra_h = int(rng.integers(round(p["min_pad_fraction"] * h), round(p["max_pad_fraction"] * h) + 1))
    left = int(rng.integers(0, extra_w + 1))
    top = int(rng.integers(0, extra_h + 1))
    out, boxes = pad(img, boxes, left, top, extra_w - left, extra_h - top, p["fill_value"])
    return out, boxes, {"left": left, "top": top, "right": extra_w - left, "bottom": extra_h - top}


def _op_black_patches(img, boxes, rng, p):
    out, placed = _black_patches(
        img, int(p["max_black_patches"]), p["size_to_image_ratio"], rng, p["patch_probability"]
    )
    return out, boxes, {"patches": [list(t) for t in placed]}


def _op_resize(img, boxes, rng, p):
    target = ImageSize(int(p["new_width"]), int(p["new_height"]))
    out, boxes = resize(img, boxes, target)
    return out, boxes, {"width": target.width, "height": target.height}


def _op_subtract_mean(img, boxes, rng, p):
    return photometric(img, "subtract_channel_mean", means=p["means"]), boxes, {"means": p["means"]}


def _op_scale_boxes(img, boxes, rng, p):
    size = image_size(img)
    out = [denormalize(b, size) if b.space is CoordinateSpace.NORMALIZED else b for b in boxes]
    return img, out, {}


OPS: Dict[str, OpSpec] = {
    "normalize_image": OpSpec(1.0, {"original_minval": 0.0, "original_maxval": 1.0, "target_minval": 0.0, "target_maxval": 1.0}, _op_normalize),
    "random_horizontal_flip": OpSpec(0.5, {}, _op_flip_h),
    "random_vertical_flip": OpSpec(0.5, {}, _op_flip_v),
    "random_rotation90": OpSpec(0.5, {}, _op_rot90),
    "random_pixel_value_scale": OpSpec(1.0, {"minval": 0.9, "maxval": 1.1}, _op_pixel_scale),
    "random_image_scale": OpSpec(1.0, {"min_scale_ratio": 0.5, "max_scale_ratio": 2.0}, _op_image_scale),
    "rgb_to_gray": OpSpec(1.0, {}, _op_gray),
    "random_rgb_to_gray": OpSpec(0.1, {}, _op_gray),
    "random_adjust_brightness": OpSpec(1.0, {"max_delta": 0.2}, _op_brightness),
    "random_adjust_contrast": OpSpec(1.0, {"min_delta": 0.8, "max_delta": 1.25}, _op_contrast),
    "random_crop_image": OpSpec(
        1.0,
        {
            "min_area": 0.1, "max_area": 1.0,
            "min_aspect_ratio": 0.75, "max_aspect_ratio": 1.33,
            "retain_threshold": DEFAULT_RETAIN_THRESHOLD, "max_attempts": 100,
        },
        _op_crop,
    ),
    "random_pad_image": OpSpec(1.0, {"min_pad_fraction": 0.0, "max_pad_fraction": 0.5, "fill_value": 0.0}, _op_pad),
    "random_black_patches": OpSpec(1.0, {"max_black_patches": 10, "patch_probability": 0.5, "size_to_image_ratio": 0.1}, _op_black_patches),
    "resize_image": OpSpec(1.0, {"new_width": None, "new_height": None}, _op_resize),
    "subtract_channel_mean": OpSpec(1.0, {"means": [0.0, 0.0, 0.0]}, _op_subtract_mean),
    "scale_boxes_to_pixel_coordinates": OpSpec(1.0, {}, _op_scale_boxes),
}


@dataclass(frozen=True)
class AugmentOp:
    kind: str
    probability: Optional[float] = None
    params: Dict[str, object] = field(default_factory=dict)

    def resolved(self) -> Tuple[float, Dict[str, object]]:
        """Probability and full parameter dict with defaults filled in."""
        if self.kind not in OPS:
            raise ConfigError(f"unknown op {self.kind!r}")
        spec = OPS[self.kind]
        p = spec.default_probability if self.probability is None else float(self.probability)
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"probability must be in [0, 1], got {p}")
        unknown = set(self.params) - set(spec.defaults)
        if unknown:
            raise ConfigError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        params = {**spec.defaults, **self.params}
        missing = [k for k, v in params.items() if v is None]
        if missing:
            raise ConfigError(f"{self.kind} requires {missing}")
        return p, params


@dataclass(frozen=True)
class AugmentConfig:
    ops: Tuple[AugmentOp, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    def validate(self):
        if not self.ops:
            raise ConfigError("augmentation config has no ops")
        for i, op in enumerate(self.ops):
            try:
                op.resolved()
            except ConfigError as exc:
                raise AugmentError(i, str(exc)) from None


def parse_augment_config(text: str, seed: int = 0) -> AugmentConfig:
    """Read a JSON array of ``{"op": ..., "probability": ..., <params>}`` objects."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"augmentation config is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ConfigError("augmentation config must be a JSON array")
    ops = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or "op" not in item:
            raise AugmentError(i, "each entry needs an 'op' key")
        params = {k: v for k, v in item.items() if k not in ("op", "probability")}
        ops.append(AugmentOp(item["op"], item.get("probability"), params))
    config = AugmentConfig(tuple(ops), seed)
    config.validate()
    return config


def op_rng(seed: int, op_index: int, image_id: str) -> np.random.Generator:
    """Counter-based stream for one (seed, op, image) triple."""
    seed &= (1 << 64) - 1
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    key = [seed & 0xFFFFFFFF, seed >> 32, op_index] + [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def apply_pipeline(img: np.ndarray, boxes: Sequence[BoundingBox], config: AugmentConfig, image_id: str = ""):
    """Run every op in ``config`` on one image.

    Returns ``(image, boxes, log)``. ``log`` holds one dict per op that fired
    with its index, name and sampled parameters. Crop entries also list the
    indices (into that op's input boxes) that survived; see
    :func:`surviving_indices`.

    Raises:
        AugmentError: carrying the index of the first op that failed.
    """
    config.validate()
    img = np.asarray(img, dtype=np.float64)
    boxes = list(boxes)
    log: List[dict] = []
    for i, op in enumerate(config.ops):
        p, params = op.resolved()
        rng = op_rng(config.seed, i, image_id)
        if not rng.random() < p:
            continue
        try:
            img, boxes, sampled = OPS[op.kind].run(img, boxes, rng, params)
        except (ConfigError, SpaceMismatchError) as exc:
            raise AugmentError(i, str(exc)) from None
        log.append({"index": i, "op": op.kind, "params": sampled})
    return img, boxes, log


def surviving_indices(log: Sequence[dict], n_boxes: int) -> List[int]:
    """Indices of the original input boxes that are still present after a pipeline run."""
    alive = list(range(n_boxes))
    for entry in log:
        kept = entry["params"].get("kept") if isinstance(entry.get("params"), dict) else None
        if kept is not None:
            alive = [alive[k] for k in kept]
    return alive
