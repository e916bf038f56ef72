"""Raster primitives: patch extraction/assembly, normalization, PNG I/O.

Images are plain numpy arrays of shape (H, W, 3), dtype uint8, row-major
with the channel axis fastest. The patch flattening order used everywhere
(encryption, the patch-embedding input, the model transformation) is pinned
by PATCH_FLATTEN_ORDER below; changing it silently breaks the match between
encrypted images and transformed models.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from PIL import Image as PILImage

from .errors import FileFormatError, ValidationError
from .fileio import atomic_write_bytes
from .validation import CHANNELS, check_block_divisible, check_image

# Blocks are visited row-major over the block grid; within a block samples are
# flattened (row, col, channel) with channel fastest:
#   flat[(r*M + c)*C + ch] = img[block_row*M + r, block_col*M + c, ch]
PATCH_FLATTEN_ORDER = "blocks row-major; within a block (row, col, channel), channel fastest"


class PatchGrid(NamedTuple):
    """Block-grid geometry of a patchified image."""

    rows: int
    cols: int
    patch_dim: int


@dataclass(frozen=True)
class NormalizationConfig:
    """Per-channel affine normalization: (sample/255 - mean) / std."""

    mean: tuple[float, float, float] = (0.5, 0.5, 0.5)
    std: tuple[float, float, float] = (0.5, 0.5, 0.5)

    def __post_init__(self) -> None:
        if len(self.mean) != CHANNELS or len(self.std) != CHANNELS:
            raise ValidationError("normalization mean/std must have one entry per channel")
        object.__setattr__(self, "mean", tuple(float(m) for m in self.mean))
        object.__setattr__(self, "std", tuple(float(s) for s in self.std))
        if any(s == 0.0 for s in self.std):
            raise ValidationError("normalization std must not contain 0")

    @property
    def channel_uniform(self) -> bool:
        """True when all channels share one mean and one std.

        Channel-uniform normalization commutes with channel-mixing pixel
        shuffles; per-channel statistics only commute with the per-channel
        shuffle mode.
        """
        return len(set(self.mean)) == 1 and len(set(self.std)) == 1

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationConfig":
        return cls(mean=tuple(d["mean"]), std=tuple(d["std"]))


DEFAULT_NORMALIZATION = NormalizationConfig()

# standard per-channel ImageNet statistics; usable only with per-channel shuffling
IMAGENET_NORMALIZATION = NormalizationConfig(
    mean=(0.485, 0.456, 0.406), std=(0.229, 0.224, 0.225)
)


def extract_patches(img: np.ndarray, block_size: int) -> tuple[np.ndarray, PatchGrid]:
    """Split (H, W, C) into non-overlapping blocks, flattened per PATCH_FLATTEN_ORDER.

    Returns (patches, grid) with patches of shape (rows*cols, M*M*C) in the
    input's dtype; values are copied verbatim. H and W must be divisible by
    the block size.
    """
    arr = np.asarray(img)
    if arr.ndim != 3:
        raise ValidationError(f"expected (H, W, C) array, got shape {arr.shape}")
    check_block_divisible(arr, block_size)
    h, w, c = arr.shape
    m = block_size
    rows, cols = h // m, w // m
    patches = (
        arr.reshape(rows, m, cols, m, c)
        .transpose(0, 2, 1, 3, 4)
        .reshape(rows * cols, m * m * c)
        .copy()
    )
    return patches, PatchGrid(rows=rows, cols=cols, patch_dim=m * m * c)


def assemble_patches(
    patches: np.ndarray, grid: PatchGrid, block_size: int, channels: int = CHANNELS
) -> np.ndarray:
    """Exact inverse of :func:`extract_patches`."""
    arr = np.asarray(patches)
    m = block_size
    if arr.ndim != 2:
        raise ValidationError(f"patches must be 2-d, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValidationError("cannot assemble zero patches")
    if arr.shape[0] != grid.rows * grid.cols or arr.shape[1] != m * m * channels:
        raise ValidationError(
            f"patches shape {arr.shape} does not match grid {grid.rows}x{grid.cols} "
            f"with patch dim {m * m * channels}"
        )
    return (
        arr.reshape(grid.rows, grid.cols, m, m, channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(grid.rows * m, grid.cols * m, channels)
        .copy()
    )


def normalize(img: np.ndarray, cfg: NormalizationConfig) -> np.ndarray:
    """(sample/255 - mean[c]) / std[c] as float32, same (H, W, C) layout.

    Computed per scalar, so for channel-uniform configs the result commutes
    exactly with any sample permutation.
    """
    arr = check_image(img)
    mean = np.asarray(cfg.mean, dtype=np.float64)
    std = np.asarray(cfg.std, dtype=np.float64)
    return ((arr.astype(np.float64) / 255.0 - mean) / std).astype(np.float32)


def read_png(path: str) -> np.ndarray:
    """Load a PNG as (H, W, 3) uint8. Grayscale is promoted; alpha is rejected."""
    try:
        with PILImage.open(path) as pil:
            pil.load()
            mode = pil.mode
            if mode in ("RGBA", "LA", "PA") or "transparency" in pil.info:
                raise FileFormatError(
                    f"{path}: image has an alpha channel; flatten it before encrypting"
                )
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise FileFormatError(f"{path}: only 8-bit images are supported (mode {mode})")
            if mode != "RGB":
                pil = pil.convert("RGB")
            return np.asarray(pil, dtype=np.uint8)
    except FileFormatError:
        raise
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise FileFormatError(f"{path}: not a readable PNG image ({exc})") from exc


def write_png(img: np.ndarray, path: str) -> None:
    """Write an (H, W, 3) uint8 array losslessly; atomic on success."""
    arr = check_image(img)
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode="RGB").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())
