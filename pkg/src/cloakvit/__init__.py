"""Keyed block-wise image encryption with matching ViT model transformation.

Images are encrypted by shuffling samples within blocks and scrambling the
blocks; a classifier whose patch-embedding rows and position-embedding rows
are re-indexed with the same key then classifies encrypted images with the
same logits it produces on plain ones. The package bundles the permutation
machinery, the cipher, a deterministic transformer forward pass, a bit-exact
weights container, dataset manifest tooling, sklearn-style estimators, and
the ``cloakvit`` CLI.
"""

from .crypto import (
    MODE_MIXED,
    MODE_PER_CHANNEL,
    EncryptionParams,
    decrypt_vit,
    encrypt_pixel_based,
    encrypt_vit,
)
from .errors import (
    CloakVitError,
    FileFormatError,
    KeyFormatError,
    ValidationError,
    VerificationError,
    WeightsFormatError,
)
from .estimators import ImageEncryptor, PixelScrambler, ViTClassifier
from .permkey import Permutation, SecretKey, derive_seeds, gen_permutation
from .raster import (
    DEFAULT_NORMALIZATION,
    IMAGENET_NORMALIZATION,
    NormalizationConfig,
    PatchGrid,
    assemble_patches,
    extract_patches,
    normalize,
    read_png,
    write_png,
)
from .transform import keyspace_bits, transform_model, verify_equivalence
from .vit import ModelWeights, ViTConfig, forward, param_count, random_init
from .weights_io import load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "CloakVitError",
    "DEFAULT_NORMALIZATION",
    "EncryptionParams",
    "FileFormatError",
    "IMAGENET_NORMALIZATION",
    "ImageEncryptor",
    "KeyFormatError",
    "MODE_MIXED",
    "MODE_PER_CHANNEL",
    "ModelWeights",
    "NormalizationConfig",
    "PatchGrid",
    "Permutation",
    "PixelScrambler",
    "SecretKey",
    "ValidationError",
    "VerificationError",
    "ViTClassifier",
    "ViTConfig",
    "WeightsFormatError",
    "assemble_patches",
    "decrypt_vit",
    "derive_seeds",
    "encrypt_pixel_based",
    "encrypt_vit",
    "extract_patches",
    "forward",
    "gen_permutation",
    "keyspace_bits",
    "load_weights",
    "normalize",
    "param_count",
    "random_init",
    "read_png",
    "save_weights",
    "transform_model",
    "verify_equivalence",
    "write_png",
]
