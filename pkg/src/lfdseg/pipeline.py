"""Image ingestion, preprocessing, prediction, and mask/overlay emission."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import DataError
from .graph import BoundModel
from .kernels import softmax_channels
from .tensor import Tensor

# Standard pretrained-backbone channel statistics.
NORM_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
NORM_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

ROAD_CHANNEL = 1


def load_image(path) -> np.ndarray:
    """8-bit interleaved RGB, shape (h, w, 3)."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError:
        raise DataError(f"image not found: {path}") from None
    except Exception as e:
        raise DataError(f"cannot read image {path}: {e}") from None


def load_mask(path) -> np.ndarray:
    """Boolean road mask from an 8-bit grayscale PNG; value > 127 means road."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8) > 127
    except FileNotFoundError:
        raise DataError(f"mask not found: {path}") from None
    except Exception as e:
        raise DataError(f"cannot read mask {path}: {e}") from None


def save_image(path, rgb: np.ndarray) -> None:
    Image.fromarray(rgb.astype(np.uint8), mode="RGB").save(path)


def save_mask(path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def save_prob(path, prob: np.ndarray) -> None:
    """Probability map as 16-bit grayscale PNG, p scaled by 65535 and rounded."""
    q = np.round(np.clip(prob, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(q).save(path)


def load_prob(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype == np.uint16:
        return arr.astype(np.float32) / 65535.0
    return np.asarray(arr, dtype=np.float32) / 255.0


def preprocess(img: np.ndarray) -> Tensor:
    """HWC uint8 RGB -> normalized 1xCxHxW tensor."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise DataError(f"expected interleaved RGB, got shape {img.shape}")
    x = img.astype(np.float32) / 255.0
    x = (x - NORM_MEAN) / NORM_STD
    return Tensor(np.ascontiguousarray(x.transpose(2, 0, 1))[None])


def predict(model: BoundModel, img: np.ndarray) -> np.ndarray:
    """Per-pixel road probability at image resolution."""
    logits = model.forward(preprocess(img))
    prob = softmax_channels(logits)
    return prob.data[0, ROAD_CHANNEL]


def predict_with_taps(model: BoundModel, img: np.ndarray, taps=()) -> tuple[np.ndarray, dict]:
    logits, named = model.forward(preprocess(img), taps=tuple(taps) or ("logits",))
    prob = softmax_channels(logits)
    return prob.data[0, ROAD_CHANNEL], named


def to_mask(prob: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold {threshold} outside [0, 1]")
    return prob >= threshold


def overlay(img: np.ndarray, mask: np.ndarray, color=(255, 0, 0), alpha: float = 0.5) -> np.ndarray:
    if img.shape[:2] != mask.shape:
        raise DataError(f"overlay dims {img.shape[:2]} vs mask {mask.shape} differ")
    out = img.astype(np.float32)
    tint = np.array(color, dtype=np.float32)
    m = mask[..., None].astype(np.float32) * alpha
    return np.clip(out * (1.0 - m) + tint * m, 0, 255).astype(np.uint8)
