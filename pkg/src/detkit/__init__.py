"""detkit: dataset preparation and evaluation for object detectors."""

__version__ = "0.1.0"

from .annotations import (
    GroundTruthObject,
    ImageAnnotation,
    LabelMap,
    LabelMapEntry,
    ManifestRow,
    SplitSpec,
    parse_label_map,
    parse_manifest,
    parse_voc,
    split_dataset,
    to_manifest,
    write_label_map,
    write_manifest,
    write_voc,
)
from .geometry import BoundingBox, CoordinateSpace, ImageSize, area, clip, denormalize, intersect, iou, normalize
from .evaluation import (
    Detection,
    EvalConfig,
    average_precision,
    average_recall_at_k,
    evaluate_dataset,
    f1,
    match_detections,
    mean_average_precision,
    pr_curve,
    precision,
    recall,
)
from .records import decode_example, encode_example, masked_crc32c, read_records, write_records
