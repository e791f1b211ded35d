"""
Scoring a detector against ground truth
=======================================

Two images, two classes, a handful of detections. We match them, look at
the precision-recall curve and read off AP and AR.
"""

from detkit import BoundingBox, GroundTruthObject, ImageAnnotation, ImageSize
from detkit.evaluation import Detection, EvalConfig, evaluate_dataset, match_detections, pr_curve

# ground truth: one person in each frame, plus a dog in the first
gt = [
    ImageAnnotation("a.jpg", ImageSize(200, 150), (
        GroundTruthObject("person", BoundingBox(10, 10, 90, 140)),
        GroundTruthObject("dog", BoundingBox(120, 90, 190, 140)),
    )),
    ImageAnnotation("b.jpg", ImageSize(200, 150), (
        GroundTruthObject("person", BoundingBox(100, 20, 160, 130)),
    )),
]

dets = [
    Detection("a.jpg", "person", BoundingBox(12, 8, 88, 138), 0.92),
    Detection("a.jpg", "person", BoundingBox(14, 12, 90, 140), 0.55),   # duplicate, will be an FP
    Detection("a.jpg", "dog", BoundingBox(118, 95, 185, 140), 0.71),
    Detection("b.jpg", "person", BoundingBox(20, 20, 60, 60), 0.80),    # wrong place
]

# per-image verdicts
r = match_detections([d for d in dets if d.image_id == "a.jpg"], list(gt[0].objects), "a.jpg")
print("image a:", [v.value for v in r.detections], "tp/fp/fn =", r.tp, r.fp, r.fn)

# the person curve runs across both images in score order
person = pr_curve([d for d in dets if d.class_name == "person"],
                  {a.filename: [o for o in a.objects if o.class_name == "person"] for a in gt})
print("person PR points:", person.points())

report = evaluate_dataset(dets, gt, EvalConfig(iou_threshold=0.5))
for name, c in report.classes.items():
    print(f"{name:7s} AP={c.ap:.3f} P={c.precision:.2f} R={c.recall:.2f} F1={c.f1:.2f}")
print("mAP", round(report.mean_ap, 4))
print("AR@100 by stratum", report.average_recall)   # -1 means no objects of that size
