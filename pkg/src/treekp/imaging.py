"""Raster I/O and validation.

Images are float64 numpy arrays in [0, 1], shaped (H, W) for grayscale or
(H, W, 3) for RGB. PNG and the netpbm formats (PGM/PPM) are read and written
through Pillow.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from treekp.errors import DimensionError


def check_raster(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise DimensionError(f"expected (H, W) or (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionError("zero-sized image")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("image values must be finite and in [0, 1]")
    return arr


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        if im.mode in ("1", "L", "I", "I;16", "F", "P", "LA"):
            if im.mode == "P":
                im = im.convert("RGB")
                arr = np.asarray(im, dtype=np.float64) / 255.0
                return check_raster(arr)
            if im.mode in ("I", "I;16"):
                arr = np.asarray(im, dtype=np.float64)
                peak = 65535.0 if arr.max() > 255 else 255.0
                return check_raster(arr / peak)
            if im.mode == "F":
                return check_raster(np.clip(np.asarray(im, dtype=np.float64), 0, 1))
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
            return check_raster(arr)
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return check_raster(arr)


def to_uint8(img) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_image(path, img) -> None:
    """Write a [0, 1] image. Format follows the suffix (.png, .pgm, .ppm)."""
    path = Path(path)
    data = to_uint8(img)
    if path.suffix.lower() == ".ppm" and data.ndim == 2:
        data = np.stack([data] * 3, axis=-1)
    if path.suffix.lower() == ".pgm" and data.ndim == 3:
        data = to_uint8(np.asarray(img, dtype=np.float64).mean(axis=2))
    Image.fromarray(data).save(path)


def save_mask(path, mask) -> None:
    """Binary raster as 0/255 (PGM or PNG)."""
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)).save(path)
