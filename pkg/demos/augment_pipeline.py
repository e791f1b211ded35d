"""
Box-aware augmentation
======================

Every op moves the boxes along with the pixels. A pipeline is a list of
ops with firing probabilities, and a seed makes the whole thing repeatable.
"""

import json

import numpy as np

from detkit import BoundingBox
from detkit.augment import apply_pipeline, crop, flip_horizontal, parse_augment_config, rotate90

img = np.random.default_rng(0).random((60, 80, 3))   # H, W, C in [0, 1]
boxes = [BoundingBox(10, 5, 30, 40), BoundingBox(50, 20, 78, 58)]

# single ops
_, flipped = flip_horizontal(img, boxes)
print("flip:", [b.as_tuple() for b in flipped])          # x -> W - x
rot_img, rotated = rotate90(img, boxes)
print("rot90:", rot_img.shape, [b.as_tuple() for b in rotated])

# a crop keeps a box only if at least a quarter of it survives
_, kept = crop(img, boxes, BoundingBox(0, 0, 40, 60))
print("crop to left half:", [b.as_tuple() for b in kept])

config = parse_augment_config(json.dumps([
    {"op": "random_horizontal_flip"},
    {"op": "random_crop_image", "probability": 0.8},
    {"op": "random_adjust_brightness", "max_delta": 0.2},
    {"op": "random_black_patches", "probability": 0.5},
]), seed=42)

out, out_boxes, log = apply_pipeline(img, boxes, config, image_id="frame_001.jpg")
print("output shape:", out.shape)
for entry in log:
    print("  fired:", entry["op"])
print("boxes:", [tuple(round(v, 2) for v in b.as_tuple()) for b in out_boxes])

# same seed and image id, same result
again = apply_pipeline(img, boxes, config, image_id="frame_001.jpg")
print("repeatable:", np.array_equal(out, again[0]) and out_boxes == again[1])
