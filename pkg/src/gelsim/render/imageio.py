"""Image export: 8-bit PNG for inspection, raw planar float32 for datasets."""
from __future__ import annotations

import numpy as np
from PIL import Image


def to_uint8(img: np.ndarray) -> np.ndarray:
    if img.dtype == np.uint8:
        return img
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255), 0, 255).astype(np.uint8)


def save_png(path, img: np.ndarray) -> None:
    """img: (H, W) grayscale or (H, W, 3) color, float in [0,1] or uint8."""
    arr = to_uint8(img)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Returns float64 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    return arr.astype(np.float64) / 255.0


def save_raw_f32(path, img: np.ndarray) -> None:
    """Planar channel-major float32: (C, H, W) on disk; (H, W[, C]) input."""
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = np.moveaxis(arr, -1, 0)
    arr.astype("<f4").tofile(path)


def load_raw_f32(path, height: int, width: int, channels: int = 3) -> np.ndarray:
    arr = np.fromfile(path, dtype="<f4").reshape(channels, height, width)
    return np.moveaxis(arr, 0, -1).astype(np.float64)
