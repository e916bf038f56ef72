"""Model transformation matching the block-wise image cipher.

Encryption relabels the components of each patch vector and the order of the
patches. Self-attention over the patch tokens is equivariant to token order,
so re-indexing exactly two tensors makes the classifier consume encrypted
images natively:

  * patch-embedding weight rows follow the within-block sample shuffle,
  * position-embedding sequence rows (class row 0 pinned) follow the block
    scramble.

Every other tensor is untouched. With both sides derived from the same key
streams, logits on (transformed model, encrypted image) match logits on
(plain model, plain image) up to float32 summation-order noise, bounded at
1e-5 per logit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crypto import (
    MODE_MIXED,
    EncryptionParams,
    block_permutation,
    encrypt_vit,
    patch_permutation,
)
from .errors import ValidationError
from .permkey import Permutation, SecretKey, splitmix64_next
from .vit import ModelWeights, ViTConfig, forward

EQUIVALENCE_TOLERANCE = 1e-5


def _transform_with_perms(
    model: ModelWeights, pix_perm: Permutation, blk_perm: Permutation
) -> ModelWeights:
    """Re-index patch-embedding rows by pix_perm and patch pos rows by blk_perm.

    Gather semantics mirror the image side: encrypted input component i is
    plain component pix_perm[i], so weight row i must become plain row
    pix_perm[i]; encrypted patch j is plain patch blk_perm[j], so its position
    row must follow it. All remaining tensors are shared unchanged (they are
    immutable, so sharing is safe).
    """
    if len(pix_perm) != model.patch_embed_weight.shape[0]:
        raise ValidationError(
            f"pixel permutation length {len(pix_perm)} does not match patch-embedding "
            f"input dimension {model.patch_embed_weight.shape[0]}"
        )
    if len(blk_perm) != model.pos_embed.shape[0] - 1:
        raise ValidationError(
            f"block permutation length {len(blk_perm)} does not match the "
            f"{model.pos_embed.shape[0] - 1} patch positions"
        )
    new_patch_embed = model.patch_embed_weight[pix_perm.indices, :]
    new_pos = np.concatenate(
        [model.pos_embed[:1], model.pos_embed[1:][blk_perm.indices]], axis=0
    )
    return ModelWeights(
        patch_embed_weight=new_patch_embed,
        patch_embed_bias=model.patch_embed_bias,
        cls_token=model.cls_token,
        pos_embed=new_pos,
        blocks=model.blocks,
        final_ln_scale=model.final_ln_scale,
        final_ln_shift=model.final_ln_shift,
        head_weight=model.head_weight,
        head_bias=model.head_bias,
    )


def transform_model(
    model: ModelWeights, cfg: ViTConfig, key: SecretKey, params: EncryptionParams
) -> ModelWeights:
    """Produce the transformed model for *key*, sharing all untouched tensors.

    The permutations are derived by the same functions the image cipher uses,
    so the two sides cannot drift apart. Channel-mixing shuffles move samples
    across channels, which only commutes with normalization when the
    normalization is channel-uniform; that precondition is enforced here.
    """
    model.validate(cfg)
    if params.block_size != cfg.patch_size:
        raise ValidationError(
            f"encryption block size {params.block_size} must equal the model patch size "
            f"{cfg.patch_size}; re-encrypt with --block-size {cfg.patch_size}"
        )
    if params.mode == MODE_MIXED and not cfg.norm.channel_uniform:
        raise ValidationError(
            "channel-mixing shuffle requires channel-uniform normalization "
            "(all means equal, all stds equal); use the per-channel mode or a "
            "uniform normalization config"
        )
    pix = patch_permutation(key, params)
    blk = block_permutation(key, cfg.num_patches)
    return _transform_with_perms(model, pix, blk)


def keyspace_bits(image_size: int, params: EncryptionParams, channels: int = 3) -> float:
    """Base-2 log of the cipher's key space: log2(D!) + log2(N!).

    D is the within-block vector length (M*M*C mixed, M*M per-channel since
    the spatial table is shared across channels) and N the block count.
    """
    if image_size < 1 or image_size % params.block_size:
        raise ValidationError(
            f"image size {image_size} must be a positive multiple of block size "
            f"{params.block_size}"
        )
    d = params.block_size * params.block_size * (channels if params.mode == MODE_MIXED else 1)
    n = (image_size // params.block_size) ** 2
    ln2 = math.log(2.0)
    return (math.lgamma(d + 1) + math.lgamma(n + 1)) / ln2


@dataclass(frozen=True)
class EquivalenceTrial:
    key_hex: str
    max_abs_delta: float
    argmax_plain: int
    argmax_encrypted: int

    @property
    def argmax_match(self) -> bool:
        return self.argmax_plain == self.argmax_encrypted


@dataclass(frozen=True)
class EquivalenceReport:
    trials: tuple[EquivalenceTrial, ...]
    tolerance: float

    @property
    def max_abs_delta(self) -> float:
        return max(t.max_abs_delta for t in self.trials)

    @property
    def argmax_agreement(self) -> float:
        return sum(t.argmax_match for t in self.trials) / len(self.trials)

    @property
    def passed(self) -> bool:
        return self.max_abs_delta <= self.tolerance and self.argmax_agreement == 1.0


def _trial_keys(key: SecretKey, trials: int) -> list[SecretKey]:
    """The given key, then keys expanded from its bytes 24-31 (reserved lane)."""
    keys = [key]
    state = int.from_bytes(key.data[24:32], "little")
    for _ in range(trials - 1):
        words = []
        for _ in range(4):
            state, value = splitmix64_next(state)
            words.append(value)
        keys.append(SecretKey(b"".join(w.to_bytes(8, "little") for w in words)))
    return keys


def verify_equivalence(
    model: ModelWeights,
    cfg: ViTConfig,
    key: SecretKey,
    img: np.ndarray,
    params: EncryptionParams | None = None,
    trials: int = 1,
    tolerance: float = EQUIVALENCE_TOLERANCE,
) -> EquivalenceReport:
    """Measure per-logit drift between the plain and the encrypted pipeline.

    Trial 1 uses *key*; additional trials use keys derived deterministically
    from its reserved bytes, so repeated runs are reproducible. Always
    returns the report; callers decide what a failed ``passed`` flag means.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    params = params or EncryptionParams(block_size=cfg.patch_size)
    plain_logits = forward(model, cfg, img)
    results = []
    for trial_key in _trial_keys(key, trials):
        transformed = transform_model(model, cfg, trial_key, params)
        encrypted = encrypt_vit(img, trial_key, params)
        enc_logits = forward(transformed, cfg, encrypted)
        results.append(
            EquivalenceTrial(
                key_hex=trial_key.hex(),
                max_abs_delta=float(np.max(np.abs(enc_logits - plain_logits))),
                argmax_plain=int(np.argmax(plain_logits)),
                argmax_encrypted=int(np.argmax(enc_logits)),
            )
        )
    return EquivalenceReport(trials=tuple(results), tolerance=tolerance)
