"""Procedural synthetic road scenes: a textured trapezoidal road receding
toward a vanishing point, on a structured sky/ground background. Fully
seeded; images and masks are a pure function of (seed, index, size)."""

from __future__ import annotations

import numpy as np

ROAD_BASE = np.array([104.0, 102.0, 106.0])
SKY_TOP = np.array([140.0, 170.0, 215.0])
SKY_HORIZON = np.array([205.0, 215.0, 228.0])
GROUND_A = np.array([88.0, 118.0, 62.0])
GROUND_B = np.array([125.0, 104.0, 70.0])


def _smooth_noise(rng, h, w, cells=6):
    """Low-frequency value noise in [0, 1] via bilinear-upsampled random grid."""
    gh, gw = cells + 1, 2 * cells + 1
    grid = rng.random((gh, gw))
    ys = np.linspace(0, gh - 1, h)
    xs = np.linspace(0, gw - 1, w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, gh - 1)
    x1 = np.minimum(x0 + 1, gw - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1 - fx) + grid[np.ix_(y0, x1)] * fx
    bot = grid[np.ix_(y1, x0)] * (1 - fx) + grid[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def make_scene(seed: int, index: int, hw=(64, 128)):
    """One (image uint8 HxWx3, road mask bool HxW) pair."""
    h, w = hw
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))

    horizon = int(h * rng.uniform(0.30, 0.45))
    vanish_x = w * rng.uniform(0.35, 0.65)
    bottom_cx = w * rng.uniform(0.35, 0.65)
    bottom_half = w * rng.uniform(0.22, 0.40)
    top_half = w * rng.uniform(0.004, 0.02)

    ys = np.arange(h)[:, None]
    xs = np.arange(w)[None, :]
    t = np.clip((ys - horizon) / max(h - 1 - horizon, 1), 0.0, 1.0)
    center = vanish_x + (bottom_cx - vanish_x) * t
    half = top_half + (bottom_half - top_half) * t ** rng.uniform(0.9, 1.4)
    road = (ys > horizon) & (np.abs(xs - center) <= half)

    img = np.empty((h, w, 3), dtype=np.float64)

    # sky: vertical gradient, slightly noised
    sky_t = (ys / max(horizon, 1)).clip(0, 1)
    sky = SKY_TOP * (1 - sky_t[..., None]) + SKY_HORIZON * sky_t[..., None]
    img[:] = sky + rng.normal(0, 3, size=(h, w, 1))

    # ground: two-tone patches from low-frequency noise plus speckle
    patches = _smooth_noise(rng, h, w, cells=int(rng.integers(4, 8)))[..., None]
    ground = GROUND_A * patches + GROUND_B * (1 - patches)
    ground = ground + rng.normal(0, 9, size=(h, w, 3))
    below = (ys >= horizon)
    img[below.repeat(w, 1)] = ground[below.repeat(w, 1)]

    # road surface: flat gray with fine speckle and faint longitudinal shading
    shade = _smooth_noise(rng, h, w, cells=3)[..., None] * 14.0
    surface = ROAD_BASE + shade + rng.normal(0, 5, size=(h, w, 3))
    # occasional center lane marking
    if rng.random() < 0.7:
        lane_half = max(w * 0.004, 0.6)
        lane = road & (np.abs(xs - center) <= lane_half) & ((ys % 8) < 5)
        surface[lane.squeeze() if lane.ndim == 3 else lane] = [212.0, 208.0, 190.0]
    img[road] = surface[road]

    # global illumination jitter
    img *= rng.uniform(0.82, 1.15)
    img += rng.normal(0, 2, size=(h, w, 3))
    return np.clip(img, 0, 255).astype(np.uint8), road


def dataset(seed: int, count: int, hw=(64, 128), start: int = 0):
    for i in range(start, start + count):
        yield make_scene(seed, i, hw)
