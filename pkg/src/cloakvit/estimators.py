"""Scikit-learn style wrappers around the functional core.

These estimators let the keyed transforms and the classifier participate in
ordinary sklearn pipelines and grid-search tooling (``get_params`` /
``set_params`` / ``clone`` all behave). None of them learn anything from
data: keys are secrets and weights are pre-trained, so ``fit`` only
validates parameters, per the convention for stateless transformers.

X is always a uint8 image stack of shape (n, H, W, 3); a single (H, W, 3)
image is accepted and returned un-batched.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .crypto import (
    MODE_MIXED,
    EncryptionParams,
    decrypt_vit,
    encrypt_pixel_based,
    encrypt_vit,
)
from .errors import ValidationError
from .permkey import SecretKey
from .validation import check_image_batch
from .vit import ModelWeights, ViTConfig, forward
from .weights_io import load_weights


def _as_key(key) -> SecretKey:
    if isinstance(key, SecretKey):
        return key
    if isinstance(key, str):
        return SecretKey.from_hex(key)
    if isinstance(key, bytes):
        return SecretKey(key)
    raise ValidationError(
        f"key must be a SecretKey, 64 hex characters, or 32 bytes, got {type(key).__name__}"
    )


class ImageEncryptor(BaseEstimator, TransformerMixin):
    """Keyed block-wise image encryption as a transformer.

    Parameters
    ----------
    key : str | bytes | SecretKey
        The 256-bit secret key (hex string, raw bytes, or SecretKey).
    block_size : int, default=16
        Side length M of the non-overlapping blocks; must equal the patch
        size of the downstream classifier for encrypted-domain inference.
    mode : {"mixed", "per-channel"}, default="mixed"
        Whether the within-block shuffle mixes channels.

    ``transform`` encrypts, ``inverse_transform`` decrypts; both are exact
    bijections on uint8 images whose sides are divisible by ``block_size``.
    """

    def __init__(self, key=None, block_size: int = 16, mode: str = MODE_MIXED):
        self.key = key
        self.block_size = block_size
        self.mode = mode

    def _resolved(self) -> tuple[SecretKey, EncryptionParams]:
        if self.key is None:
            raise ValidationError("ImageEncryptor requires a key")
        return _as_key(self.key), EncryptionParams(block_size=self.block_size, mode=self.mode)

    def fit(self, X=None, y=None) -> "ImageEncryptor":
        """No-op apart from parameter validation (nothing is learned)."""
        self._resolved()
        return self

    def transform(self, X) -> np.ndarray:
        key, params = self._resolved()
        batch, single = check_image_batch(X)
        out = np.stack([encrypt_vit(img, key, params) for img in batch])
        return out[0] if single else out

    def inverse_transform(self, X) -> np.ndarray:
        key, params = self._resolved()
        batch, single = check_image_batch(X)
        out = np.stack([decrypt_vit(img, key, params) for img in batch])
        return out[0] if single else out


class PixelScrambler(BaseEstimator, TransformerMixin):
    """Conventional pixel-value obfuscation (keyed flips + channel shuffles).

    Provided for baseline comparisons; it alters sample values, so no model
    transformation can compensate for it.
    """

    def __init__(self, key=None):
        self.key = key

    def _resolved(self) -> SecretKey:
        if self.key is None:
            raise ValidationError("PixelScrambler requires a key")
        return _as_key(self.key)

    def fit(self, X=None, y=None) -> "PixelScrambler":
        self._resolved()
        return self

    def transform(self, X) -> np.ndarray:
        key = self._resolved()
        batch, single = check_image_batch(X)
        out = np.stack([encrypt_pixel_based(img, key) for img in batch])
        return out[0] if single else out


class ViTClassifier(BaseEstimator, ClassifierMixin):
    """Frozen transformer classifier over uint8 image stacks.

    Parameters
    ----------
    weights : ModelWeights, optional
        In-memory weights; requires ``config``.
    config : ViTConfig, optional
        Architecture description matching ``weights``.
    model_path : str, optional
        Path to a .vtw container; mutually exclusive with ``weights``.

    The model is pre-trained and never updated: ``fit`` validates inputs and
    records ``classes_``, ``predict`` returns class indices, and
    ``decision_function`` exposes the raw logits.
    """

    def __init__(self, weights=None, config=None, model_path=None):
        self.weights = weights
        self.config = config
        self.model_path = model_path

    def _resolved(self) -> tuple[ModelWeights, ViTConfig]:
        if self.model_path is not None:
            if self.weights is not None:
                raise ValidationError("pass either model_path or weights, not both")
            # cache the parsed container; invalidated when the path param changes
            if getattr(self, "_loaded_from", None) != self.model_path:
                self._loaded = load_weights(self.model_path)
                self._loaded_from = self.model_path
            return self._loaded
        if self.weights is None or self.config is None:
            raise ValidationError("ViTClassifier requires model_path, or weights and config")
        return self.weights, self.config

    def fit(self, X=None, y=None) -> "ViTClassifier":
        _, cfg = self._resolved()
        self.classes_ = np.arange(cfg.num_classes)
        return self

    def decision_function(self, X) -> np.ndarray:
        model, cfg = self._resolved()
        batch, single = check_image_batch(X)
        logits = np.stack([forward(model, cfg, img) for img in batch])
        return logits[0] if single else logits

    def predict(self, X) -> np.ndarray:
        logits = self.decision_function(X)
        return np.argmax(logits, axis=-1)
