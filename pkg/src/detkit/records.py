"""Framed, checksummed record files.

A record file is a bare concatenation of frames::

    u64 length (little endian)
    u32 masked CRC32C of the 8 length bytes
    payload (length bytes)
    u32 masked CRC32C of the payload

which is the same framing TFRecord files use. Each payload written by
:func:`encode_example` is a little-endian TLV-ish layout::

    b"DREC" | u16 version=1
    | u32 len + utf-8 filename | u32 width | u32 height
    | u32 len + image bytes
    | u32 n_boxes | n * (u32 class_id, f32 xmin, f32 ymin, f32 xmax, f32 ymax)

Boxes are stored in normalized coordinates.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator, Union

from .annotations import ImageAnnotation, LabelMap
from .errors import (
    CorruptionError,
    RecordFormatError,
    RecordVersionError,
    RecordWriteError,
    TruncationError,
)
from .geometry import BoundingBox, CoordinateSpace, ImageSize, normalize

MAGIC = b"DREC"
VERSION = 1
FRAME_OVERHEAD = 16

_MASK_DELTA = 0xA282EAD8
_CASTAGNOLI_REFLECTED = 0x82F63B78  # bit-reversed 0x1EDC6F41


def _make_table():
    table = []
    for n in range(256):
        c = n
        for _ in range(8):
            c = (c >> 1) ^ _CASTAGNOLI_REFLECTED if c & 1 else c >> 1
        table.append(c)
    return tuple(table)


_TABLE = _make_table()


def crc32c(data: bytes) -> int:
    crc = 0xFFFFFFFF
    table = _TABLE
    for byte in data:
        crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


def mask_crc(crc: int) -> int:
    return (((crc >> 15) | (crc << 17)) + _MASK_DELTA) & 0xFFFFFFFF


def unmask_crc(masked: int) -> int:
    rot = (masked - _MASK_DELTA) & 0xFFFFFFFF
    return ((rot >> 17) | (rot << 15)) & 0xFFFFFFFF


def masked_crc32c(data: bytes) -> int:
    return mask_crc(crc32c(data))


# ---------------------------------------------------------------------------
# Frames


def encode_frame(payload: bytes) -> bytes:
    length = struct.pack("<Q", len(payload))
    return b"".join(
        (
            length,
            struct.pack("<I", masked_crc32c(length)),
            payload,
            struct.pack("<I", masked_crc32c(payload)),
        )
    )


def write_records(payloads: Iterable[bytes], sink: Union[str, os.PathLike, BinaryIO]) -> int:
    """Append one frame per payload to ``sink`` and return the frame count.

    ``sink`` is a path (truncated and written) or a binary file object.
    """
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "wb") as fh:
            return write_records(payloads, fh)
    written = 0
    try:
        for payload in payloads:
            sink.write(encode_frame(bytes(payload)))
            written += 1
    except OSError as exc:
        raise RecordWriteError(str(exc), written) from exc
    return written


def _read_exact(source, n, frame, offset):
    data = source.read(n)
    if len(data) != n:
        raise TruncationError(f"expected {n} bytes, found {len(data)}", offset=offset, frame=frame)
    return data


def read_records(source: Union[str, os.PathLike, BinaryIO]) -> Iterator[bytes]:
    """Yield payloads in file order, verifying both checksums of every frame."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            yield from read_records(fh)
        return
    frame = 0
    offset = 0
    while True:
        head = source.read(12)
        if not head:
            return
        if len(head) < 12:
            raise TruncationError(f"partial frame header ({len(head)} of 12 bytes)", offset=offset, frame=frame)
        length_bytes = head[:8]
        (length_crc,) = struct.unpack("<I", head[8:])
        if masked_crc32c(length_bytes) != length_crc:
            raise CorruptionError(frame, "length")
        (length,) = struct.unpack("<Q", length_bytes)
        payload = _read_exact(source, length, frame, offset + 12)
        (payload_crc,) = struct.unpack("<I", _read_exact(source, 4, frame, offset + 12 + length))
        if masked_crc32c(payload) != payload_crc:
            raise CorruptionError(frame, "payload")
        yield payload
        frame += 1
        offset += FRAME_OVERHEAD + length


# ---------------------------------------------------------------------------
# Example payloads


@dataclass(frozen=True)
class BoxEntry:
    class_id: int
    box: BoundingBox


@dataclass(frozen=True)
class ExamplePayload:
    filename: str
    size: ImageSize
    image_bytes: bytes
    boxes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple(self.boxes))


def encode_payload(example: ExamplePayload) -> bytes:
    name = example.filename.encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<H", VERSION),
        struct.pack("<I", len(name)),
        name,
        struct.pack("<II", example.size.width, example.size.height),
        struct.pack("<I", len(example.image_bytes)),
        bytes(example.image_bytes),
        struct.pack("<I", len(example.boxes)),
    ]
    for entry in example.boxes:
        if entry.box.space is not CoordinateSpace.NORMALIZED:
            raise RecordFormatError("payload boxes must be in normalized space")
        parts.append(struct.pack("<Iffff", entry.class_id, *entry.box.as_tuple()))
    return b"".join(parts)


def encode_example(ann: ImageAnnotation, image_bytes: bytes, label_map: LabelMap) -> bytes:
    """Serialize an annotated image into a record payload.

    Raises:
        LabelLookupError: an object's class is missing from ``label_map``.
        BoundsError: an object's box leaves the image.
    """
    if not image_bytes:
        raise RecordFormatError("image_bytes must be nonempty")
    boxes = tuple(BoxEntry(label_map.resolve(obj.class_name), normalize(obj.box, ann.size)) for obj in ann.objects)
    return encode_payload(ExamplePayload(ann.filename, ann.size, bytes(image_bytes), boxes))


class _Cursor:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise TruncationError(f"payload ends inside {what}", offset=self.pos)
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_example(payload: bytes) -> ExamplePayload:
    cur = _Cursor(bytes(payload))
    if cur.take(4, "magic") != MAGIC:
        raise RecordFormatError("bad magic; not a detkit example payload")
    (version,) = cur.unpack("<H", "version")
    if version != VERSION:
        raise RecordVersionError(f"unsupported payload version {version}")
    (name_len,) = cur.unpack("<I", "filename length")
    try:
        filename = cur.take(name_len, "filename").decode("utf-8")
    except UnicodeDecodeError as exc:
        raise RecordFormatError(f"filename is not UTF-8: {exc}") from None
    width, height = cur.unpack("<II", "image size")
    (image_len,) = cur.unpack("<I", "image length")
    image_bytes = cur.take(image_len, "image bytes")
    (n_boxes,) = cur.unpack("<I", "box count")
    boxes = []
    for i in range(n_boxes):
        class_id, *coords = cur.unpack("<Iffff", f"box {i}")
        boxes.append(BoxEntry(class_id, BoundingBox(*coords, space=CoordinateSpace.NORMALIZED)))
    if cur.pos != len(cur.data):
        raise RecordFormatError(f"{len(cur.data) - cur.pos} trailing bytes after box list")
    return ExamplePayload(filename, ImageSize(width, height), image_bytes, tuple(boxes))
