"""Annotation formats: Pascal VOC XML, the CSV manifest, label maps and splits.

The manifest is a flat CSV with one row per labelled object::

    file,w,h,class,x-min,y-min,x-max,y-max[,difficult]

The ``difficult`` column is optional on input (missing means 0) and only
written when at least one row is difficult, so plain eight-column files pass
through unchanged.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

from .errors import (
    ConfigError,
    InvalidBoxError,
    LabelLookupError,
    LabelMapError,
    ManifestValueError,
    SchemaError,
    VocParseError,
)
from .geometry import BoundingBox, ImageSize

MANIFEST_COLUMNS = ["file", "w", "h", "class", "x-min", "y-min", "x-max", "y-max"]
DIFFICULT_COLUMN = "difficult"


@dataclass(frozen=True)
class GroundTruthObject:
    class_name: str
    box: BoundingBox
    difficult: bool = False

    def __post_init__(self):
        if not self.class_name:
            raise SchemaError("object class name must be nonempty")


@dataclass(frozen=True)
class ImageAnnotation:
    filename: str
    size: ImageSize
    objects: tuple = ()

    def __post_init__(self):
        if not self.filename:
            raise SchemaError("annotation filename must be nonempty")
        object.__setattr__(self, "objects", tuple(self.objects))


def bounds_violations(ann: ImageAnnotation) -> List[str]:
    """Describe every object whose box leaves the image frame.

    Parsing never clips; callers decide what to do with these.
    """
    problems = []
    w, h = ann.size.width, ann.size.height
    for i, obj in enumerate(ann.objects):
        b = obj.box
        if b.xmin < 0 or b.ymin < 0 or b.xmax > w or b.ymax > h:
            problems.append(f"{ann.filename}: object {i} ({obj.class_name}) box {b.as_tuple()} outside {w}x{h}")
    return problems


# ---------------------------------------------------------------------------
# Pascal VOC


def _number(text, element):
    if text is None:
        raise VocParseError(f"<{element}> is empty")
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise VocParseError(f"<{element}> is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise VocParseError(f"<{element}> is not finite: {text!r}")
    return value


def _child(parent, tag, path):
    node = parent.find(tag)
    if node is None:
        raise SchemaError(f"missing <{tag}> in <{path}>")
    return node


def _dimension(node, tag):
    value = _number(node.text, tag)
    if isinstance(value, float):
        if not value.is_integer():
            raise VocParseError(f"<{tag}> must be a whole number of pixels, got {value}")
        value = int(value)
    if value < 1:
        raise VocParseError(f"<{tag}> must be positive, got {value}")
    return value


def parse_voc(xml_text: str) -> ImageAnnotation:
    """Parse one Pascal VOC annotation document.

    Raises:
        VocParseError: malformed XML (with line number) or a non-numeric value.
        SchemaError: a mandatory element is missing.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise VocParseError(f"malformed XML: {exc}", line=exc.position[0]) from None
    if root.tag != "annotation":
        raise SchemaError(f"root element is <{root.tag}>, expected <annotation>")

    filename = (_child(root, "filename", "annotation").text or "").strip()
    if not filename:
        raise SchemaError("<filename> is empty")
    size_node = _child(root, "size", "annotation")
    size = ImageSize(
        _dimension(_child(size_node, "width", "size"), "width"),
        _dimension(_child(size_node, "height", "size"), "height"),
    )

    objects = []
    for obj in root.findall("object"):
        name = (_child(obj, "name", "object").text or "").strip()
        if not name:
            raise SchemaError("<name> is empty")
        difficult_node = obj.find("difficult")
        difficult = False
        if difficult_node is not None and difficult_node.text is not None:
            difficult = bool(_number(difficult_node.text, "difficult"))
        bnd = _child(obj, "bndbox", "object")
        coords = [_number(_child(bnd, tag, "bndbox").text, tag) for tag in ("xmin", "ymin", "xmax", "ymax")]
        try:
            box = BoundingBox(*coords)
        except InvalidBoxError as exc:
            raise VocParseError(f"object {name!r}: {exc}") from None
        objects.append(GroundTruthObject(name, box, difficult))
    return ImageAnnotation(filename, size, tuple(objects))


def write_voc(ann: ImageAnnotation) -> str:
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = ann.filename
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(ann.size.width)
    ET.SubElement(size, "height").text = str(ann.size.height)
    for obj in ann.objects:
        node = ET.SubElement(root, "object")
        ET.SubElement(node, "name").text = obj.class_name
        ET.SubElement(node, "difficult").text = "1" if obj.difficult else "0"
        bnd = ET.SubElement(node, "bndbox")
        for tag, value in zip(("xmin", "ymin", "xmax", "ymax"), obj.box.as_tuple()):
            ET.SubElement(bnd, tag).text = format_number(value)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


# ---------------------------------------------------------------------------
# Manifest


@dataclass(frozen=True)
class ManifestRow:
    file: str
    w: int
    h: int
    class_name: str
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    difficult: bool = False

    @property
    def box(self) -> BoundingBox:
        return BoundingBox(self.xmin, self.ymin, self.xmax, self.ymax)


def format_number(value) -> str:
    """Shortest text that parses back to the same value; integral floats print as ints."""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return repr(value) if isinstance(value, float) else str(value)


def to_manifest(anns: Iterable[ImageAnnotation]) -> List[ManifestRow]:
    rows = []
    for ann in anns:
        for obj in ann.objects:
            b = obj.box
            rows.append(
                ManifestRow(
                    ann.filename, ann.size.width, ann.size.height, obj.class_name,
                    b.xmin, b.ymin, b.xmax, b.ymax, obj.difficult,
                )
            )
    return rows


def from_manifest(rows: Iterable[ManifestRow]) -> List[ImageAnnotation]:
    """Group rows back into per-image annotations, in first-appearance order."""
    grouped = {}
    sizes = {}
    for row in rows:
        if row.file in sizes and sizes[row.file] != (row.w, row.h):
            raise ManifestValueError(f"{row.file} listed with two different sizes")
        sizes[row.file] = (row.w, row.h)
        grouped.setdefault(row.file, []).append(GroundTruthObject(row.class_name, row.box, row.difficult))
    return [ImageAnnotation(name, ImageSize(*sizes[name]), tuple(objs)) for name, objs in grouped.items()]


def write_manifest(rows: Sequence[ManifestRow], include_difficult: Optional[bool] = None) -> str:
    if include_difficult is None:
        include_difficult = any(r.difficult for r in rows)
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = MANIFEST_COLUMNS + ([DIFFICULT_COLUMN] if include_difficult else [])
    writer.writerow(header)
    for r in rows:
        line = [r.file, r.w, r.h, r.class_name] + [format_number(v) for v in (r.xmin, r.ymin, r.xmax, r.ymax)]
        if include_difficult:
            line.append(1 if r.difficult else 0)
        writer.writerow(line)
    return out.getvalue()


def _manifest_number(text, column, row):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise ManifestValueError(f"column {column!r} is not numeric: {text!r}", row=row) from None
    if not math.isfinite(value):
        raise ManifestValueError(f"column {column!r} is not finite: {text!r}", row=row)
    return value


def parse_manifest(csv_text: str) -> List[ManifestRow]:
    """Parse manifest CSV text.

    Row numbers in errors count the header as row 1.
    """
    reader = csv.reader(io.StringIO(csv_text))
    header = next(reader, None)
    if header not in (MANIFEST_COLUMNS, MANIFEST_COLUMNS + [DIFFICULT_COLUMN]):
        raise SchemaError(f"manifest header {header!r} does not match {','.join(MANIFEST_COLUMNS)}[,difficult]")
    has_difficult = len(header) == 9

    rows = []
    for lineno, fields in enumerate(reader, start=2):
        if not fields:
            continue
        if len(fields) != len(header):
            raise ManifestValueError(f"expected {len(header)} fields, got {len(fields)}", row=lineno)
        file, w, h, cls = fields[:4]
        if not file or not cls:
            raise ManifestValueError("empty file or class", row=lineno)
        w = _manifest_number(w, "w", lineno)
        h = _manifest_number(h, "h", lineno)
        if not isinstance(w, int) or not isinstance(h, int) or w < 1 or h < 1:
            raise ManifestValueError(f"image size must be positive integers, got {w}x{h}", row=lineno)
        coords = [_manifest_number(v, c, lineno) for v, c in zip(fields[4:8], MANIFEST_COLUMNS[4:])]
        difficult = False
        if has_difficult:
            if fields[8] not in ("0", "1", ""):
                raise ManifestValueError(f"difficult must be 0 or 1, got {fields[8]!r}", row=lineno)
            difficult = fields[8] == "1"
        row = ManifestRow(file, w, h, cls, *coords, difficult=difficult)
        try:
            row.box
        except InvalidBoxError as exc:
            raise ManifestValueError(str(exc), row=lineno) from None
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Label map


@dataclass(frozen=True)
class LabelMapEntry:
    id: int
    name: str
    display_name: str


@dataclass(frozen=True)
class LabelMap:
    """Registry linking class names, integer ids and display names.

    Id 0 is reserved for background, so valid ids start at 1.
    """

    entries: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids, names = set(), set()
        for e in self.entries:
            if isinstance(e.id, bool) or not isinstance(e.id, int) or e.id < 1:
                raise LabelMapError(f"label id must be an integer >= 1, got {e.id!r}")
            if not e.name:
                raise LabelMapError("label name must be nonempty")
            if e.id in ids:
                raise LabelMapError(f"duplicate label id {e.id}")
            if e.name in names:
                raise LabelMapError(f"duplicate label name {e.name!r}")
            ids.add(e.id)
            names.add(e.name)
        object.__setattr__(self, "_by_name", {e.name: e for e in self.entries})
        object.__setattr__(self, "_by_id", {e.id: e for e in self.entries})

    def __len__(self):
        return len(self.entries)

    def __contains__(self, name):
        return name in self._by_name

    @property
    def names(self) -> List[str]:
        return [e.name for e in self.entries]

    def resolve(self, name: str) -> int:
        try:
            return self._by_name[name].id
        except KeyError:
            raise LabelLookupError(name) from None

    def resolve_id(self, label_id: int) -> str:
        try:
            return self._by_id[label_id].name
        except KeyError:
            raise LabelLookupError(label_id) from None

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "LabelMap":
        """Assign ids 1, 2, ... in first-appearance order."""
        seen = []
        for name in names:
            if name not in seen:
                seen.append(name)
        return cls(tuple(LabelMapEntry(i, n, n[:1].upper() + n[1:]) for i, n in enumerate(seen, start=1)))


def resolve(label_map: LabelMap, name: str) -> int:
    return label_map.resolve(name)


def resolve_id(label_map: LabelMap, label_id: int) -> str:
    return label_map.resolve_id(label_id)


def parse_label_map(text: str) -> LabelMap:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LabelMapError(f"label map is not valid JSON: {exc}") from None
    if not isinstance(data, list):
        raise LabelMapError("label map must be a JSON array")
    entries = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or set(item) != {"id", "name", "display_name"}:
            raise LabelMapError(f"entry {i} must have exactly the keys id, name, display_name")
        if not isinstance(item["name"], str) or not isinstance(item["display_name"], str):
            raise LabelMapError(f"entry {i}: name and display_name must be strings")
        entries.append(LabelMapEntry(item["id"], item["name"], item["display_name"]))
    return LabelMap(tuple(entries))


def write_label_map(label_map: LabelMap) -> str:
    data = [{"id": e.id, "name": e.name, "display_name": e.display_name} for e in label_map.entries]
    return json.dumps(data, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Splits


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    eval_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0.0 <= self.eval_fraction < 1.0:
            raise ConfigError(f"eval_fraction must be in [0, 1), got {self.eval_fraction}")
        if self.train_fraction + self.eval_fraction >= 1.0:
            raise ConfigError("train_fraction + eval_fraction must be < 1 so a test split remains")


@dataclass(frozen=True)
class Split:
    train: List[str]
    test: List[str]
    eval: List[str]


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def split_sizes(n: int, spec: SplitSpec) -> tuple:
    """``(train, test, eval)`` sizes for ``n`` items."""
    n_train = min(_round_half_up(spec.train_fraction * n), n)
    n_eval = min(_round_half_up(spec.eval_fraction * n), n - n_train)
    return n_train, n - n_train - n_eval, n_eval


def split_dataset(items: Sequence[str], spec: SplitSpec) -> Split:
    """Deterministically partition ``items`` into train/test/eval.

    Items are sorted first so the result depends only on the item set and
    the seed, then shuffled with a seeded Fisher-Yates pass.
    """
    if not items:
        raise ConfigError("cannot split an empty item list")
    if len(set(items)) != len(items):
        raise ConfigError("split items must be unique")
    order = sorted(items)
    rng = random.Random(spec.seed)
    for i in range(len(order) - 1, 0, -1):
        j = rng.randrange(i + 1)
        order[i], order[j] = order[j], order[i]
    n_train, n_test, n_eval = split_sizes(len(order), spec)
    return Split(
        train=order[:n_train],
        test=order[n_train + n_eval:],
        eval=order[n_train:n_train + n_eval],
    )
