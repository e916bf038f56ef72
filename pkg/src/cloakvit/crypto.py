"""Keyed block-wise image encryption and the pixel-value baseline scheme.

The block-wise cipher is a two-step keyed permutation:

  1. pixel shuffling -- one permutation, derived from the pixel stream of the
     key, applied identically to every block's flattened sample vector;
  2. block scrambling -- a second permutation, derived from the block stream,
     that reorders the blocks spatially.

Both steps move samples without changing their values, so a classifier whose
patch embedding and position embeddings are re-indexed with the same tables
(see :mod:`cloakvit.transform`) sees encrypted inputs as a mere relabeling.

The pixel-value baseline (negative-positive flips plus per-position RGB
channel permutation) is the conventional contrast scheme: it *does* change
sample values, which is exactly why no matching model transformation exists
for it. It is a reconstruction in the spirit of published block-cipher-style
image obfuscation, not a bit-compatible port of any particular tool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .permkey import Permutation, SecretKey, derive_seeds, gen_permutation, splitmix64_stream
from .raster import assemble_patches, extract_patches
from .validation import CHANNELS, check_block_divisible, check_image

MODE_MIXED = "mixed"
MODE_PER_CHANNEL = "per-channel"
SHUFFLE_MODES = (MODE_MIXED, MODE_PER_CHANNEL)

# lexicographic order of the six permutations of (R, G, B), gather semantics
RGB_PERMUTATIONS = np.array(
    [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)], dtype=np.int64
)


@dataclass(frozen=True)
class EncryptionParams:
    """Block size and shuffle mode of the block-wise cipher.

    ``mixed`` shuffles all M*M*C samples of a block as one vector (larger key
    space, requires channel-uniform normalization downstream); ``per-channel``
    shuffles the M*M spatial positions and applies the same spatial table to
    each channel, which keeps every sample in its original channel.
    """

    block_size: int = 16
    mode: str = MODE_MIXED

    def __post_init__(self) -> None:
        if self.block_size < 1:
            raise ValidationError(f"block size must be >= 1, got {self.block_size}")
        if self.mode not in SHUFFLE_MODES:
            raise ValidationError(
                f"unknown shuffle mode {self.mode!r}; expected one of {SHUFFLE_MODES}"
            )


def patch_permutation(
    key: SecretKey, params: EncryptionParams, channels: int = CHANNELS
) -> Permutation:
    """Within-block gather table over the flattened patch vector (length M*M*C).

    Derived from the key's pixel stream. In per-channel mode the M*M spatial
    table is expanded so position p of channel c maps to position perm[p] of
    the same channel; both modes therefore yield one table of length M*M*C
    that the model transformation reuses verbatim.
    """
    pixel_seed, _ = derive_seeds(key)
    m2 = params.block_size * params.block_size
    if params.mode == MODE_MIXED:
        return gen_permutation(pixel_seed, m2 * channels)
    spatial = gen_permutation(pixel_seed, m2)
    expanded = (spatial.indices[:, None] * channels + np.arange(channels)).reshape(-1)
    return Permutation(expanded)


def block_permutation(key: SecretKey, num_blocks: int) -> Permutation:
    """Block-scrambling gather table, derived from the key's block stream."""
    _, block_seed = derive_seeds(key)
    return gen_permutation(block_seed, num_blocks)


def _apply_blockwise(
    img: np.ndarray, block_size: int, pix_perm: Permutation, blk_perm: Permutation
) -> np.ndarray:
    """Shared core: gather patches by blk_perm and samples by pix_perm."""
    patches, grid = extract_patches(img, block_size)
    if len(pix_perm) != grid.patch_dim:
        raise ValidationError(
            f"pixel permutation has length {len(pix_perm)}, patches have {grid.patch_dim}"
        )
    if len(blk_perm) != patches.shape[0]:
        raise ValidationError(
            f"block permutation has length {len(blk_perm)}, image has {patches.shape[0]} blocks"
        )
    out = patches[np.ix_(blk_perm.indices, pix_perm.indices)]
    return assemble_patches(out, grid, block_size, img.shape[2])


def encrypt_vit(img: np.ndarray, key: SecretKey, params: EncryptionParams) -> np.ndarray:
    """Encrypt an (H, W, 3) uint8 image blockwise; dimensions are preserved."""
    arr = check_image(img)
    check_block_divisible(arr, params.block_size)
    pix = patch_permutation(key, params)
    blk = block_permutation(key, (arr.shape[0] // params.block_size) * (arr.shape[1] // params.block_size))
    return _apply_blockwise(arr, params.block_size, pix, blk)


def decrypt_vit(img: np.ndarray, key: SecretKey, params: EncryptionParams) -> np.ndarray:
    """Exact inverse of :func:`encrypt_vit` under the same key and params."""
    arr = check_image(img)
    check_block_divisible(arr, params.block_size)
    pix = patch_permutation(key, params)
    blk = block_permutation(key, (arr.shape[0] // params.block_size) * (arr.shape[1] // params.block_size))
    return _apply_blockwise(arr, params.block_size, pix.invert(), blk.invert())


def pixel_baseline_seed(key: SecretKey) -> int:
    """Baseline keystream seed: little-endian read of key bytes 16-23.

    Domain-separated from the block-wise scheme's two streams (bytes 0-15).
    """
    return int.from_bytes(key.data[16:24], "little")


def _pixel_baseline_codes(seed: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-position keystream: (flip flags (n, 3) bool, channel gather rows (n, 3)).

    One 64-bit word per pixel position, in row-major scan order: bits 0..2 are
    the negative-positive flags for channels 0..2 of the *unshuffled* pixel,
    and (word >> 3) % 6 selects one of the six RGB permutations.
    """
    words = splitmix64_stream(seed, count)
    flags = np.stack([(words >> np.uint64(c)) & np.uint64(1) for c in range(CHANNELS)], axis=1)
    perm_index = ((words >> np.uint64(3)) % np.uint64(6)).astype(np.int64)
    return flags.astype(bool), RGB_PERMUTATIONS[perm_index]


def _apply_pixel_codes(img: np.ndarray, flags: np.ndarray, perm_rows: np.ndarray) -> np.ndarray:
    """Negative-positive flips, then per-position channel gather."""
    h, w, _ = img.shape
    flat = img.reshape(h * w, CHANNELS)
    flipped = np.where(flags, 255 - flat.astype(np.int16), flat).astype(np.uint8)
    shuffled = np.take_along_axis(flipped, perm_rows, axis=1)
    return shuffled.reshape(h, w, CHANNELS)


def encrypt_pixel_based(img: np.ndarray, key: SecretKey) -> np.ndarray:
    """Conventional pixel-value scheme: keyed flips + channel shuffles.

    The keystream depends only on the key and the pixel position, so all
    images encrypted under one key share the same per-position codes. Unlike
    the block-wise cipher this changes sample values, so the sample multiset
    is not preserved and no accuracy-preserving model transformation exists.
    """
    arr = check_image(img)
    h, w, _ = arr.shape
    flags, perm_rows = _pixel_baseline_codes(pixel_baseline_seed(key), h * w)
    return _apply_pixel_codes(arr, flags, perm_rows)
