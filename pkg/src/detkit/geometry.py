"""Axis-aligned bounding boxes and the IoU metric.

Coordinates are continuous: a box covers the rectangle ``[xmin, xmax] x
[ymin, ymax]`` and its area is ``(xmax - xmin) * (ymax - ymin)`` with no
``+1`` pixel-index convention. VOC values are kept verbatim, so whether a
source tool wrote 0- or 1-based pixel indices is left to the data.

Every box carries its coordinate space and binary operations refuse to mix
pixel and normalized boxes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .errors import BoundsError, InvalidBoxError, SpaceMismatchError, UndefinedIoUError


class CoordinateSpace(str, enum.Enum):
    PIXEL = "pixel"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class ImageSize:
    width: int
    height: int

    def __post_init__(self):
        for name in ("width", "height"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise InvalidBoxError(f"image {name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class BoundingBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    space: CoordinateSpace = CoordinateSpace.PIXEL

    def __post_init__(self):
        if not (self.xmin <= self.xmax and self.ymin <= self.ymax):
            raise InvalidBoxError(f"negative extent: {self.as_tuple()}")
        if self.space is CoordinateSpace.NORMALIZED:
            if not all(0.0 <= v <= 1.0 for v in self.as_tuple()):
                raise InvalidBoxError(f"normalized box outside [0, 1]: {self.as_tuple()}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    def as_tuple(self) -> tuple:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def translate(self, dx, dy) -> "BoundingBox":
        return BoundingBox(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy, self.space)


def _check_space(a: BoundingBox, b: BoundingBox):
    if a.space is not b.space:
        raise SpaceMismatchError(f"cannot combine {a.space.value} and {b.space.value} boxes")


def area(b: BoundingBox) -> float:
    return (b.xmax - b.xmin) * (b.ymax - b.ymin)


def intersect(a: BoundingBox, b: BoundingBox) -> Optional[BoundingBox]:
    """Overlap rectangle of two boxes, or ``None`` when they do not overlap.

    Boxes that merely touch along an edge (or a zero-width overlap) count as
    not overlapping.
    """
    _check_space(a, b)
    xmin = max(a.xmin, b.xmin)
    ymin = max(a.ymin, b.ymin)
    xmax = min(a.xmax, b.xmax)
    ymax = min(a.ymax, b.ymax)
    if xmin >= xmax or ymin >= ymax:
        return None
    return BoundingBox(xmin, ymin, xmax, ymax, a.space)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area divided by union area.

    Raises:
        UndefinedIoUError: both boxes have zero area.
        SpaceMismatchError: the boxes live in different coordinate spaces.
    """
    _check_space(a, b)
    area_a, area_b = area(a), area(b)
    if area_a == 0 and area_b == 0:
        raise UndefinedIoUError(f"IoU of two zero-area boxes {a.as_tuple()} and {b.as_tuple()}")
    overlap = intersect(a, b)
    if overlap is None:
        return 0.0
    inter = area(overlap)
    return inter / (area_a + area_b - inter)


def clip(b: Optional[BoundingBox], bounds: BoundingBox) -> Optional[BoundingBox]:
    """Restrict ``b`` to ``bounds``; ``None`` in, or no overlap, gives ``None``."""
    if b is None:
        return None
    return intersect(b, bounds)


def normalize(b: BoundingBox, size: ImageSize) -> BoundingBox:
    if b.space is not CoordinateSpace.PIXEL:
        raise SpaceMismatchError("normalize expects a pixel-space box")
    if b.xmin < 0 or b.ymin < 0 or b.xmax > size.width or b.ymax > size.height:
        raise BoundsError(f"box {b.as_tuple()} outside {size.width}x{size.height} image")
    return BoundingBox(
        b.xmin / size.width,
        b.ymin / size.height,
        b.xmax / size.width,
        b.ymax / size.height,
        CoordinateSpace.NORMALIZED,
    )


def denormalize(b: BoundingBox, size: ImageSize) -> BoundingBox:
    if b.space is not CoordinateSpace.NORMALIZED:
        raise SpaceMismatchError("denormalize expects a normalized box")
    return BoundingBox(
        b.xmin * size.width,
        b.ymin * size.height,
        b.xmax * size.width,
        b.ymax * size.height,
        CoordinateSpace.PIXEL,
    )


def full_frame(size: ImageSize) -> BoundingBox:
    return BoundingBox(0, 0, size.width, size.height)
