"""Random instance generators shared by the unit and acceptance tests."""

import numpy as np

from detkit.annotations import GroundTruthObject, ImageAnnotation
from detkit.evaluation import Detection
from detkit.geometry import BoundingBox, ImageSize


def random_image(h, w, c=3, seed=0):
    return np.random.default_rng(seed).random((h, w, c))


PIPELINE_OPS = [
    {"op": "random_horizontal_flip"},
    {"op": "random_vertical_flip"},
    {"op": "random_rotation90"},
    {"op": "random_crop_image", "probability": 0.7},
    {"op": "random_pad_image", "probability": 0.5},
    {"op": "random_image_scale", "probability": 0.5, "min_scale_ratio": 0.5, "max_scale_ratio": 1.5},
    {"op": "random_adjust_brightness"},
    {"op": "random_adjust_contrast"},
    {"op": "random_black_patches", "probability": 0.5},
    {"op": "random_rgb_to_gray", "probability": 0.3},
]


def random_instance(rng):
    images = []
    for i in range(rng.randint(1, 4)):
        gts = []
        for _ in range(rng.randint(0, 4)):
            x0, y0 = rng.randint(0, 12), rng.randint(0, 12)
            gts.append((rng.choice("ab"), (x0, y0, x0 + rng.randint(1, 8), y0 + rng.randint(1, 8)), rng.random() < 0.25))
        dets = []
        for _ in range(rng.randint(0, 5)):
            if gts and rng.random() < 0.6:
                _, (x0, y0, x1, y1), _ = rng.choice(gts)
                x0, y0 = max(0, x0 + rng.randint(-2, 2)), max(0, y0 + rng.randint(-2, 2))
                x1, y1 = x0 + max(1, x1 - x0 + rng.randint(-2, 2)), y0 + max(1, y1 - y0 + rng.randint(-2, 2))
                box = (x0, y0, x1, y1)
            else:
                x0, y0 = rng.randint(0, 12), rng.randint(0, 12)
                box = (x0, y0, x0 + rng.randint(1, 8), y0 + rng.randint(1, 8))
            dets.append((rng.choice("ab"), box, rng.choice([0.1, 0.3, 0.5, 0.5, 0.7, 0.9, 1.0])))
        images.append({"id": f"im{i}", "gts": gts, "dets": dets})
    return images


def to_library(images):
    anns = [ImageAnnotation(im["id"], ImageSize(32, 32), tuple(GroundTruthObject(c, BoundingBox(*b), d) for c, b, d in im["gts"])) for im in images]
    dets = [Detection(im["id"], c, BoundingBox(*b), s) for im in images for c, b, s in im["dets"]]
    return dets, anns
