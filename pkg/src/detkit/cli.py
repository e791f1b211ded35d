"""``detkit`` command-line entry point.

Subcommands mirror the dataset workflow: import-voc, split, records,
augment, eval, report, fuse. Errors go to stderr as ``<error_code>: message``
and exit with status 1.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from collections import Counter
from pathlib import Path
from typing import List, Optional

from . import __version__
from .annotations import (
    LabelMap,
    ManifestRow,
    SplitSpec,
    bounds_violations,
    from_manifest,
    parse_label_map,
    parse_manifest,
    parse_voc,
    split_dataset,
    to_manifest,
    write_label_map,
    write_manifest,
)
from .augment import apply_pipeline, parse_augment_config, surviving_indices, to_float, to_uint8
from .errors import DetkitError, InputError
from .evaluation import COCO_IOU_THRESHOLDS, STRATA, Detection, EvalConfig, evaluate_dataset
from .fusion import (
    State,
    SynonymTable,
    align,
    discretize,
    fuse_activity,
    parse_domain_specs,
    parse_observations,
)
from .geometry import BoundingBox
from .plotting import loss_curve_svg, pr_curve_svg
from .records import decode_example, encode_example, read_records, write_records
from .training_log import LOSS_COLUMNS, parse_loss_csv, summarize_loss_log


class CliError(DetkitError):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def atomic_write(path, data) -> None:
    """Write via a sibling temp file and rename, creating parent dirs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise CliError("missing_input", f"input file not found: {p}")
    return p.read_text(encoding="utf-8")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


# ---------------------------------------------------------------------------


def cmd_import_voc(args) -> int:
    ann_dir = Path(args.annotations)
    if not ann_dir.is_dir():
        raise CliError("missing_input", f"annotations directory not found: {ann_dir}")
    files = sorted(ann_dir.glob("*.xml"))
    if not files:
        raise CliError("no_annotations", f"no annotations found in {ann_dir}")
    anns, failures = [], []
    for f in files:
        try:
            anns.append(parse_voc(f.read_text(encoding="utf-8")))
        except DetkitError as exc:
            failures.append(f"{f.name}: {exc}")
    if failures:
        raise CliError("voc_parse_error", "failed to parse:\n  " + "\n  ".join(failures))

    violations = [v for a in anns for v in bounds_violations(a)]
    missing = []
    if args.images:
        missing = [a.filename for a in anns if not (Path(args.images) / a.filename).is_file()]
    rows = to_manifest(anns)
    atomic_write(args.out, write_manifest(rows))
    summary = {
        "annotation_files": len(files),
        "rows": len(rows),
        "images_without_objects": sum(1 for a in anns if not a.objects),
        "per_class": dict(sorted(Counter(r.class_name for r in rows).items())),
        "bounds_violations": violations,
        "missing_images": missing,
    }
    if args.label_map_out:
        atomic_write(args.label_map_out, write_label_map(LabelMap.from_names(r.class_name for r in rows)))
    print(_dumps(summary), end="")
    return 0


def cmd_split(args) -> int:
    rows = parse_manifest(_read_text(args.manifest))
    files = list(dict.fromkeys(r.file for r in rows))
    spec = SplitSpec(args.train_frac, args.eval_frac, args.seed)
    split = split_dataset(files, spec)
    out = Path(args.out)
    parts = {"train": split.train, "test": split.test}
    if args.eval_frac > 0:
        parts["eval"] = split.eval
    include_difficult = any(r.difficult for r in rows)
    counts = {}
    for name, members in parts.items():
        keep = set(members)
        subset = [r for r in rows if r.file in keep]
        atomic_write(out / f"{name}_labels.csv", write_manifest(subset, include_difficult))
        counts[name] = {"images": len(members), "rows": len(subset)}
    print(_dumps({"seed": args.seed, "splits": counts}), end="")
    return 0


def _inspect_records(path) -> int:
    if not Path(path).is_file():
        raise CliError("missing_input", f"record file not found: {path}")
    n = 0
    for payload in read_records(path):
        ex = decode_example(payload)
        print(json.dumps({
            "frame": n,
            "length": len(payload),
            "filename": ex.filename,
            "width": ex.size.width,
            "height": ex.size.height,
            "image_bytes": len(ex.image_bytes),
            "boxes": [{"class_id": b.class_id, "box": list(b.box.as_tuple())} for b in ex.boxes],
        }))
        n += 1
    print(json.dumps({"frames": n, "crc": "ok"}))
    return 0


def _check_decodes(path):
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.verify()
    except Exception as exc:  # noqa: BLE001 - Pillow raises many types
        return str(exc)
    return None


def cmd_records(args) -> int:
    if args.inspect:
        return _inspect_records(args.inspect)
    if not (args.manifest and args.images and args.out):
        raise CliError("usage_error", "records needs --manifest, --images and --out (or --inspect FILE)")
    rows = parse_manifest(_read_text(args.manifest))
    anns = from_manifest(rows)
    if args.label_map:
        label_map = parse_label_map(_read_text(args.label_map))
    else:
        label_map = LabelMap.from_names(r.class_name for r in rows)
    images = Path(args.images)
    problems = []
    for a in anns:
        p = images / a.filename
        if not p.is_file():
            problems.append(f"{a.filename}: missing")
        else:
            err = _check_decodes(p)
            if err:
                problems.append(f"{a.filename}: does not decode ({err})")
    if problems:
        raise CliError("missing_image", "unusable images:\n  " + "\n  ".join(problems))
    payloads = [encode_example(a, (images / a.filename).read_bytes(), label_map) for a in anns]
    buf = io.BytesIO()
    count = write_records(payloads, buf)
    atomic_write(args.out, buf.getvalue())
    if not args.label_map:
        atomic_write(Path(args.out).with_name("label_map.json"), write_label_map(label_map))
    print(_dumps({"records": count, "out": str(args.out)}), end="")
    return 0


def _load_image(path):
    import numpy as np
    from PIL import Image

    with Image.open(path) as im:
        fmt = im.format
        im = im.convert("L") if im.mode in ("L", "1", "I;16", "I") else im.convert("RGB")
        return to_float(np.asarray(im)), fmt


def _save_image(path, img, fmt):
    from PIL import Image

    arr = to_uint8(img)
    im = Image.fromarray(arr[:, :, 0] if arr.shape[2] == 1 else arr)
    buf = io.BytesIO()
    kwargs = {"quality": 95} if (fmt or "").upper() == "JPEG" else {}
    im.save(buf, format=fmt or "PNG", **kwargs)
    atomic_write(path, buf.getvalue())


def cmd_augment(args) -> int:
    config = parse_augment_config(_read_text(args.config), args.seed)
    rows = parse_manifest(_read_text(args.manifest))
    anns = from_manifest(rows)
    images = Path(args.images)
    out = Path(args.out)
    new_rows: List[ManifestRow] = []
    log_lines = []
    dropped = 0
    for a in anns:
        src = images / a.filename
        if not src.is_file():
            raise CliError("missing_image", f"image not found: {src}")
        img, fmt = _load_image(src)
        boxes = [o.box for o in a.objects]
        img2, boxes2, log = apply_pipeline(img, boxes, config, image_id=a.filename)
        alive = surviving_indices(log, len(boxes))
        dropped += len(boxes) - len(alive)
        dst = out / "images" / a.filename
        if log:
            _save_image(dst, img2, fmt)
        else:
            atomic_write(dst, src.read_bytes())
        h, w = img2.shape[:2]
        for i, b in zip(alive, boxes2):
            o = a.objects[i]
            new_rows.append(ManifestRow(a.filename, w, h, o.class_name, b.xmin, b.ymin, b.xmax, b.ymax, o.difficult))
        log_lines.append(json.dumps({"image": a.filename, "ops": log}))
    atomic_write(out / "labels.csv", write_manifest(new_rows, any(r.difficult for r in rows)))
    atomic_write(out / "augment_log.jsonl", "\n".join(log_lines) + ("\n" if log_lines else ""))
    print(_dumps({"images": len(anns), "rows": len(new_rows), "dropped_boxes": dropped, "seed": args.seed}), end="")
    return 0


def parse_detections(jsonl: str) -> List[Detection]:
    dets = []
    for lineno, line in enumerate(jsonl.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            dets.append(Detection(str(d["image_id"]), str(d["class"]), BoundingBox(*d["bbox"]), float(d["score"])))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"detections line {lineno}: {exc}") from None
    return dets


def cmd_eval(args) -> int:
    anns = from_manifest(parse_manifest(_read_text(args.manifest)))
    dets = parse_detections(_read_text(args.detections))
    strata = tuple(args.strata.split(",")) if args.strata else STRATA
    config = EvalConfig(
        iou_threshold=args.iou,
        comparison=args.comparison,
        ap_mode=args.ap_mode,
        k=args.k,
        ar_iou_thresholds=COCO_IOU_THRESHOLDS if args.coco_sweep else None,
        strata=strata,
    )
    report = evaluate_dataset(dets, anns, config)
    text = _dumps(report.to_dict())
    if args.out:
        atomic_write(args.out, text)
    else:
        print(text, end="")
    if args.curves:
        curves = Path(args.curves)
        for name, c in report.classes.items():
            if c.curve is not None:
                atomic_write(curves / f"pr_{name}.csv", c.curve.to_csv())
                atomic_write(curves / f"pr_{name}.svg", pr_curve_svg(c.curve, f"Precision-recall: {name} (AP {c.ap:.4g})"))
    return 0


def cmd_report(args) -> int:
    log = parse_loss_csv(_read_text(args.loss_log))
    summary = summarize_loss_log(log, args.smoothing, args.threshold)
    out = Path(args.out)
    atomic_write(out / "loss_summary.json", _dumps(summary))
    for name in LOSS_COLUMNS:
        svg = loss_curve_svg(log.steps, getattr(log, name), summary["columns"][name]["smoothed"], f"Loss/{name}")
        atomic_write(out / f"{name}.svg", svg)
    print(_dumps({"converged": summary["converged"], "final_total_loss_smoothed": summary["columns"]["total_loss"]["final_smoothed"]}), end="")
    return 0


def cmd_fuse(args) -> int:
    table = SynonymTable.from_dict(json.loads(_read_text(args.synonyms))) if args.synonyms else SynonymTable({})
    visual = parse_observations(_read_text(args.visual))
    if args.synonyms:
        visual = [align(o, table) for o in visual]
    accel = parse_observations(_read_text(args.accel)) if args.accel else []
    query = None
    if args.start is not None or args.end is not None:
        if args.start is None or args.end is None:
            raise CliError("usage_error", "--start and --end go together")
        query = (args.start, args.end)
    states = fuse_activity(visual, accel, args.window, args.spike, args.max_gap, query)
    domains = parse_domain_specs(_read_text(args.domains)) if args.domains else {}
    timeline = []
    for s in states:
        entry = s.to_dict()
        spec = domains.get("accel_magnitude")
        if spec is not None:
            lo = s.t0 - (args.window if s.state in (State.FALL_DETECTED, State.LYING_DOWN) else 0)
            window = [o.value for o in accel if lo <= o.t_ms <= s.t1]
            if window:
                entry["accel_peak_bin"] = discretize(max(window), spec)
        timeline.append(entry)
    text = _dumps({"window_ms": args.window, "spike_g": args.spike, "timeline": timeline})
    if args.out:
        atomic_write(args.out, text)
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------


def _default_seed() -> int:
    raw = os.environ.get("DETKIT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError("config_error", f"DETKIT_SEED must be an integer, got {raw!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage_error", f"{self.prog}: {message}")


def build_parser(default_seed: int = 0) -> argparse.ArgumentParser:
    parser = _Parser(prog="detkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"detkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--version", action="version", version=f"detkit {__version__}")
        p.set_defaults(func=func)
        return p

    p = add("import-voc", cmd_import_voc, "Parse a directory of Pascal VOC XML files into a manifest CSV.")
    p.add_argument("--annotations", required=True)
    p.add_argument("--images")
    p.add_argument("--out", required=True)
    p.add_argument("--label-map-out")

    p = add("split", cmd_split, "Split a manifest into train/test(/eval) manifests by image.")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--eval-frac", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--out", required=True, help="output directory")

    p = add("records", cmd_records, "Write a record file from a manifest, or inspect one.")
    p.add_argument("--manifest")
    p.add_argument("--images")
    p.add_argument("--label-map")
    p.add_argument("--out")
    p.add_argument("--inspect", metavar="RECORD_FILE")

    p = add("augment", cmd_augment, "Apply an augmentation config to every manifest image.")
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--out", required=True, help="output directory")

    p = add("eval", cmd_eval, "Evaluate detections against a ground-truth manifest.")
    p.add_argument("--manifest", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--comparison", choices=(">=", ">"), default=">=")
    p.add_argument("--ap-mode", choices=("continuous", "eleven_point"), default="continuous")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--coco-sweep", action="store_true", help="average AR over IoU 0.50:0.05:0.95")
    p.add_argument("--strata", help="comma-separated subset of all,small,medium,large")
    p.add_argument("--out")
    p.add_argument("--curves", help="directory for per-class PR curve CSV and SVG files")

    p = add("report", cmd_report, "Summarize a training loss log and plot the curves.")
    p.add_argument("--loss-log", required=True)
    p.add_argument("--smoothing", type=float, default=0.6)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--out", required=True, help="output directory")

    p = add("fuse", cmd_fuse, "Fuse visual labels and accelerometer samples into an activity timeline.")
    p.add_argument("--visual", required=True)
    p.add_argument("--accel")
    p.add_argument("--synonyms")
    p.add_argument("--domains")
    p.add_argument("--window", type=float, default=2000.0)
    p.add_argument("--spike", type=float, default=2.5)
    p.add_argument("--max-gap", type=float)
    p.add_argument("--start", type=float)
    p.add_argument("--end", type=float)
    p.add_argument("--out")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        parser = build_parser(_default_seed())
        args = parser.parse_args(argv)
        return args.func(args)
    except DetkitError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io_error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
