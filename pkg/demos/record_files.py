"""
Packing annotated images into a record file
===========================================

Each image and its boxes become one checksummed frame. We write a few,
read them back, then flip one byte to see the reader catch it.
"""

import io

from detkit import BoundingBox, GroundTruthObject, ImageAnnotation, ImageSize, LabelMap
from detkit.errors import CorruptionError
from detkit.records import decode_example, encode_example, masked_crc32c, read_records, write_records

label_map = LabelMap.from_names(["lying", "standing"])
anns = [
    ImageAnnotation("abc.jpg", ImageSize(1067, 1600), (GroundTruthObject("lying", BoundingBox(1, 504, 989, 1240)),)),
    ImageAnnotation("xyz.jpg", ImageSize(1080, 1080), (GroundTruthObject("standing", BoundingBox(21, 184, 1062, 1066)),)),
]

# fake image bytes are fine here; the CLI checks that real files decode
payloads = [encode_example(a, b"\xff\xd8 jpeg bytes " + a.filename.encode(), label_map) for a in anns]

buf = io.BytesIO()
print("frames written:", write_records(payloads, buf))
print("file size:", len(buf.getvalue()), "bytes")

for payload in read_records(io.BytesIO(buf.getvalue())):
    ex = decode_example(payload)
    # boxes are stored normalized to [0, 1], as float32
    print(ex.filename, ex.size, [(b.class_id, [round(v, 4) for v in b.box.as_tuple()]) for b in ex.boxes])

print("masked CRC of nothing: 0x%08X" % masked_crc32c(b""))

damaged = bytearray(buf.getvalue())
damaged[-5] ^= 0x01          # somewhere in the last frame's payload
try:
    list(read_records(io.BytesIO(bytes(damaged))))
except CorruptionError as exc:
    print("caught:", exc)
