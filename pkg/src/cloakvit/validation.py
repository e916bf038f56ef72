"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

CHANNELS = 3


def check_image(img, *, name: str = "image") -> np.ndarray:
    """Require an (H, W, 3) uint8 array; returns it unchanged."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValidationError(f"{name} must have dtype uint8, got {arr.dtype}")
    if arr.ndim != 3 or arr.shape[2] != CHANNELS:
        raise ValidationError(f"{name} must have shape (H, W, {CHANNELS}), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValidationError(f"{name} must be non-empty, got {arr.shape}")
    return arr


def check_image_batch(X, *, name: str = "X") -> tuple[np.ndarray, bool]:
    """Accept a single (H, W, 3) image or an (n, H, W, 3) stack.

    Returns (batch, was_single): the batch always has 4 dimensions so callers
    can loop uniformly and un-wrap single inputs on the way out.
    """
    arr = np.asarray(X)
    if arr.ndim == 3:
        return check_image(arr, name=name)[None, ...], True
    if arr.ndim == 4:
        if arr.dtype != np.uint8:
            raise ValidationError(f"{name} must have dtype uint8, got {arr.dtype}")
        if arr.shape[3] != CHANNELS:
            raise ValidationError(f"{name} must have shape (n, H, W, {CHANNELS}), got {arr.shape}")
        return arr, False
    raise ValidationError(f"{name} must be 3-d or 4-d, got {arr.ndim}-d shape {arr.shape}")


def check_block_divisible(img: np.ndarray, block_size: int, *, name: str = "image") -> None:
    if block_size < 1:
        raise ValidationError(f"block size must be >= 1, got {block_size}")
    h, w = img.shape[:2]
    if h % block_size or w % block_size:
        raise ValidationError(
            f"{name} dimensions {h}x{w} are not divisible by block size {block_size}; "
            "resize the input before encrypting (this toolkit never resamples)"
        )


def check_fraction(value: float, *, name: str = "fraction") -> float:
    if not (0.0 < value < 1.0):
        raise ValidationError(f"{name} must be strictly between 0 and 1, got {value}")
    return float(value)
