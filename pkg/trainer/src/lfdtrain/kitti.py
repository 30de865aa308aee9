"""KITTI-road ground-truth conversion: the released annotations encode road
pixels as magenta (255, 0, 255) on a dark background; the evaluation
pipeline wants plain 8-bit masks (road 255, rest 0)."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

ROAD_RGB = (255, 0, 255)


def convert_gt(src_path: str, dst_path: str) -> float:
    """Write the binarized mask; returns the road fraction for logging."""
    arr = np.asarray(Image.open(src_path).convert("RGB"))
    road = np.all(arr == np.array(ROAD_RGB, dtype=np.uint8), axis=-1)
    Image.fromarray(np.where(road, 255, 0).astype(np.uint8)).save(dst_path)
    return float(road.mean())


def convert_dir(src_dir: str, dst_dir: str) -> int:
    os.makedirs(dst_dir, exist_ok=True)
    n = 0
    for name in sorted(os.listdir(src_dir)):
        if not name.lower().endswith(".png"):
            continue
        convert_gt(os.path.join(src_dir, name), os.path.join(dst_dir, name))
        n += 1
    return n
