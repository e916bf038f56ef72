"""Minimal deterministic ViT classifier forward pass.

Pre-norm transformer blocks, learned 1-d position embeddings, exact-erf GELU,
layer-norm epsilon 1e-6, single class-token head. Activations are stored as
float32, but every dot product, layer-norm statistic and softmax sum is
accumulated in float64 before rounding, which keeps logits stable to ~1e-6
under permutation-induced reordering of the summations.

Weight orientation: linear maps are stored (in, out) and applied as
``y = x @ W + b``, except the classifier head which is stored
(num_classes, embed_dim) and applied as ``logits = cls @ W.T + b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterator

import numpy as np
from scipy.special import erf

from .errors import ValidationError
from .permkey import splitmix64_uniform
from .raster import DEFAULT_NORMALIZATION, NormalizationConfig, extract_patches, normalize
from .validation import CHANNELS, check_image

LAYER_NORM_EPS = 1e-6
INIT_SCALE = 0.02  # random_init draws uniform values in [-INIT_SCALE, INIT_SCALE]


@dataclass(frozen=True)
class ViTConfig:
    """Architecture hyperparameters of the classifier."""

    image_size: int = 224
    patch_size: int = 16
    embed_dim: int = 384
    depth: int = 12
    heads: int = 6
    mlp_ratio: float = 4.0
    num_classes: int = 4
    norm: NormalizationConfig = DEFAULT_NORMALIZATION

    def __post_init__(self) -> None:
        for name in ("image_size", "patch_size", "embed_dim", "depth", "heads", "num_classes"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.image_size % self.patch_size:
            raise ValidationError(
                f"image size {self.image_size} not divisible by patch size {self.patch_size}"
            )
        if self.embed_dim % self.heads:
            raise ValidationError(
                f"embed dim {self.embed_dim} not divisible by head count {self.heads}"
            )
        if self.mlp_ratio <= 0 or (self.embed_dim * self.mlp_ratio) % 1:
            raise ValidationError(
                f"mlp_ratio {self.mlp_ratio} must yield an integral hidden width"
            )

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size * self.grid_size

    @property
    def seq_len(self) -> int:
        return self.num_patches + 1  # class token

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * CHANNELS

    @property
    def mlp_hidden(self) -> int:
        return int(self.embed_dim * self.mlp_ratio)

    @classmethod
    def vit_s16(
        cls, num_classes: int = 4, norm: NormalizationConfig = DEFAULT_NORMALIZATION
    ) -> "ViTConfig":
        """The small 16-pixel-patch preset: 384 dims, 12 layers, 6 heads."""
        return cls(
            image_size=224,
            patch_size=16,
            embed_dim=384,
            depth=12,
            heads=6,
            mlp_ratio=4.0,
            num_classes=num_classes,
            norm=norm,
        )

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "patch_size": self.patch_size,
            "embed_dim": self.embed_dim,
            "depth": self.depth,
            "heads": self.heads,
            "mlp_ratio": self.mlp_ratio,
            "num_classes": self.num_classes,
            "norm": self.norm.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ViTConfig":
        try:
            return cls(
                image_size=int(d["image_size"]),
                patch_size=int(d["patch_size"]),
                embed_dim=int(d["embed_dim"]),
                depth=int(d["depth"]),
                heads=int(d["heads"]),
                mlp_ratio=float(d["mlp_ratio"]),
                num_classes=int(d["num_classes"]),
                norm=NormalizationConfig.from_dict(d["norm"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed config: {exc}") from exc


@dataclass(frozen=True)
class BlockWeights:
    """One pre-norm transformer block."""

    ln1_scale: np.ndarray
    ln1_shift: np.ndarray
    q_weight: np.ndarray
    q_bias: np.ndarray
    k_weight: np.ndarray
    k_bias: np.ndarray
    v_weight: np.ndarray
    v_bias: np.ndarray
    proj_weight: np.ndarray
    proj_bias: np.ndarray
    ln2_scale: np.ndarray
    ln2_shift: np.ndarray
    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    fc2_weight: np.ndarray
    fc2_bias: np.ndarray


@dataclass(frozen=True)
class ModelWeights:
    """All tensors of a classifier, float32, immutable after construction."""

    patch_embed_weight: np.ndarray  # (patch_dim, embed_dim)
    patch_embed_bias: np.ndarray  # (embed_dim,)
    cls_token: np.ndarray  # (embed_dim,)
    pos_embed: np.ndarray  # (seq_len, embed_dim), row 0 = class token
    blocks: tuple[BlockWeights, ...]
    final_ln_scale: np.ndarray
    final_ln_shift: np.ndarray
    head_weight: np.ndarray  # (num_classes, embed_dim)
    head_bias: np.ndarray  # (num_classes,)

    def __post_init__(self) -> None:
        for _, tensor in self.named_tensors():
            tensor.setflags(write=False)

    def named_tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """All tensors with canonical names, in serialization order."""
        yield "patch_embed.weight", self.patch_embed_weight
        yield "patch_embed.bias", self.patch_embed_bias
        yield "cls_token", self.cls_token
        yield "pos_embed", self.pos_embed
        for i, blk in enumerate(self.blocks):
            for f in fields(BlockWeights):
                yield f"blocks.{i}.{_BLOCK_TENSOR_NAMES[f.name]}", getattr(blk, f.name)
        yield "final_ln.scale", self.final_ln_scale
        yield "final_ln.shift", self.final_ln_shift
        yield "head.weight", self.head_weight
        yield "head.bias", self.head_bias

    @property
    def num_params(self) -> int:
        return sum(int(t.size) for _, t in self.named_tensors())

    def validate(self, cfg: ViTConfig) -> None:
        """Check every tensor's shape against the config and reject non-finite values."""
        expected = dict(expected_tensor_table(cfg))
        for name, tensor in self.named_tensors():
            if name not in expected:
                raise ValidationError(f"unexpected tensor {name}")
            if tuple(tensor.shape) != expected[name]:
                raise ValidationError(
                    f"tensor {name} has shape {tuple(tensor.shape)}, expected {expected[name]}"
                )
            if tensor.dtype != np.float32:
                raise ValidationError(f"tensor {name} must be float32, got {tensor.dtype}")
            if not np.all(np.isfinite(tensor)):
                raise ValidationError(f"tensor {name} contains non-finite values")
        if len(expected) != sum(1 for _ in self.named_tensors()):
            raise ValidationError("tensor count does not match config")


_BLOCK_TENSOR_NAMES = {
    "ln1_scale": "ln1.scale",
    "ln1_shift": "ln1.shift",
    "q_weight": "attn.q.weight",
    "q_bias": "attn.q.bias",
    "k_weight": "attn.k.weight",
    "k_bias": "attn.k.bias",
    "v_weight": "attn.v.weight",
    "v_bias": "attn.v.bias",
    "proj_weight": "attn.proj.weight",
    "proj_bias": "attn.proj.bias",
    "ln2_scale": "ln2.scale",
    "ln2_shift": "ln2.shift",
    "fc1_weight": "mlp.fc1.weight",
    "fc1_bias": "mlp.fc1.bias",
    "fc2_weight": "mlp.fc2.weight",
    "fc2_bias": "mlp.fc2.bias",
}


def expected_tensor_table(cfg: ViTConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical (name, shape) table for a config; also the .vtw payload order."""
    e, h = cfg.embed_dim, cfg.mlp_hidden
    table: list[tuple[str, tuple[int, ...]]] = [
        ("patch_embed.weight", (cfg.patch_dim, e)),
        ("patch_embed.bias", (e,)),
        ("cls_token", (e,)),
        ("pos_embed", (cfg.seq_len, e)),
    ]
    for i in range(cfg.depth):
        table += [
            (f"blocks.{i}.ln1.scale", (e,)),
            (f"blocks.{i}.ln1.shift", (e,)),
            (f"blocks.{i}.attn.q.weight", (e, e)),
            (f"blocks.{i}.attn.q.bias", (e,)),
            (f"blocks.{i}.attn.k.weight", (e, e)),
            (f"blocks.{i}.attn.k.bias", (e,)),
            (f"blocks.{i}.attn.v.weight", (e, e)),
            (f"blocks.{i}.attn.v.bias", (e,)),
            (f"blocks.{i}.attn.proj.weight", (e, e)),
            (f"blocks.{i}.attn.proj.bias", (e,)),
            (f"blocks.{i}.ln2.scale", (e,)),
            (f"blocks.{i}.ln2.shift", (e,)),
            (f"blocks.{i}.mlp.fc1.weight", (e, h)),
            (f"blocks.{i}.mlp.fc1.bias", (h,)),
            (f"blocks.{i}.mlp.fc2.weight", (h, e)),
            (f"blocks.{i}.mlp.fc2.bias", (e,)),
        ]
    table += [
        ("final_ln.scale", (e,)),
        ("final_ln.shift", (e,)),
        ("head.weight", (cfg.num_classes, e)),
        ("head.bias", (cfg.num_classes,)),
    ]
    return table


def param_count(cfg: ViTConfig) -> int:
    """Closed-form total parameter count; equals the element sum of every tensor."""
    d, e, h = cfg.patch_dim, cfg.embed_dim, cfg.mlp_hidden
    per_block = 4 * e + 4 * (e * e + e) + (e * h + h) + (h * e + e)
    return (
        (d * e + e)  # patch embedding
        + e  # class token
        + cfg.seq_len * e  # position embeddings
        + cfg.depth * per_block
        + 2 * e  # final layer norm
        + (cfg.num_classes * e + cfg.num_classes)  # head
    )


def random_init(cfg: ViTConfig, seed: int) -> ModelWeights:
    """Deterministic fixture weights: uniform in [-0.02, 0.02].

    One SplitMix64 stream seeded with *seed* is consumed tensor by tensor in
    the serialization-table order of :func:`expected_tensor_table`. Layer-norm
    scale tensors are offset by +1 (values in [0.98, 1.02]): near-zero scales
    would attenuate the signal ~50x per block and leave the class-token
    logits essentially independent of the input, which makes random models
    useless as classifier stand-ins.
    """
    total = param_count(cfg)
    values = ((splitmix64_uniform(seed, total) * 2.0 - 1.0) * INIT_SCALE).astype(np.float32)
    arrays = {}
    offset = 0
    for name, shape in expected_tensor_table(cfg):
        size = int(np.prod(shape))
        tensor = values[offset : offset + size].reshape(shape).copy()
        if name.endswith("ln1.scale") or name.endswith("ln2.scale") or name == "final_ln.scale":
            tensor += np.float32(1.0)
        arrays[name] = tensor
        offset += size
    return weights_from_arrays(arrays, cfg)


def weights_from_arrays(arrays: dict, cfg: ViTConfig) -> ModelWeights:
    """Assemble ModelWeights from a {canonical name: float32 array} mapping."""
    blocks = []
    for i in range(cfg.depth):
        blocks.append(
            BlockWeights(
                **{
                    field: arrays[f"blocks.{i}.{suffix}"]
                    for field, suffix in _BLOCK_TENSOR_NAMES.items()
                }
            )
        )
    model = ModelWeights(
        patch_embed_weight=arrays["patch_embed.weight"],
        patch_embed_bias=arrays["patch_embed.bias"],
        cls_token=arrays["cls_token"],
        pos_embed=arrays["pos_embed"],
        blocks=tuple(blocks),
        final_ln_scale=arrays["final_ln.scale"],
        final_ln_shift=arrays["final_ln.shift"],
        head_weight=arrays["head.weight"],
        head_bias=arrays["head.bias"],
    )
    model.validate(cfg)
    return model


def _linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """y = x @ W + b, accumulated in float64, rounded to float32."""
    return (x.astype(np.float64) @ weight.astype(np.float64) + bias.astype(np.float64)).astype(
        np.float32
    )


def _add(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (x.astype(np.float64) + y.astype(np.float64)).astype(np.float32)


def _layer_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Per-token layer norm with population variance, float64 statistics."""
    x64 = x.astype(np.float64)
    mean = x64.mean(axis=-1, keepdims=True)
    var = np.square(x64 - mean).mean(axis=-1, keepdims=True)
    y = (x64 - mean) / np.sqrt(var + LAYER_NORM_EPS)
    return (y * scale.astype(np.float64) + shift.astype(np.float64)).astype(np.float32)


def _gelu(x: np.ndarray) -> np.ndarray:
    """Exact erf-form GELU, evaluated in float64."""
    x64 = x.astype(np.float64)
    return (0.5 * x64 * (1.0 + erf(x64 / math.sqrt(2.0)))).astype(np.float32)


def _attention(h: np.ndarray, blk: BlockWeights, heads: int) -> np.ndarray:
    q = _linear(h, blk.q_weight, blk.q_bias)
    k = _linear(h, blk.k_weight, blk.k_bias)
    v = _linear(h, blk.v_weight, blk.v_bias)
    tokens, dim = h.shape
    head_dim = dim // heads
    scale = 1.0 / math.sqrt(head_dim)
    ctx = np.empty((tokens, dim), dtype=np.float32)
    for a in range(heads):
        sl = slice(a * head_dim, (a + 1) * head_dim)
        qa = q[:, sl].astype(np.float64)
        ka = k[:, sl].astype(np.float64)
        va = v[:, sl].astype(np.float64)
        scores = (qa @ ka.T) * scale
        scores -= scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        weights = (e / e.sum(axis=1, keepdims=True)).astype(np.float32)
        ctx[:, sl] = (weights.astype(np.float64) @ va).astype(np.float32)
    return _linear(ctx, blk.proj_weight, blk.proj_bias)


def forward(model: ModelWeights, cfg: ViTConfig, img: np.ndarray) -> np.ndarray:
    """Class logits for one (image_size, image_size, 3) uint8 image.

    Pure function: identical inputs give bit-identical float32 logits
    regardless of call order or thread count.
    """
    arr = check_image(img)
    if arr.shape[0] != cfg.image_size or arr.shape[1] != cfg.image_size:
        raise ValidationError(
            f"image shape {arr.shape[:2]} does not match model input size {cfg.image_size}"
        )
    model.validate(cfg)

    x = normalize(arr, cfg.norm)
    patches, _ = extract_patches(x, cfg.patch_size)
    tokens = _linear(patches, model.patch_embed_weight, model.patch_embed_bias)
    seq = np.concatenate([model.cls_token[None, :], tokens], axis=0)
    seq = _add(seq, model.pos_embed)

    for blk in model.blocks:
        seq = _add(seq, _attention(_layer_norm(seq, blk.ln1_scale, blk.ln1_shift), blk, cfg.heads))
        h = _layer_norm(seq, blk.ln2_scale, blk.ln2_shift)
        seq = _add(seq, _linear(_gelu(_linear(h, blk.fc1_weight, blk.fc1_bias)), blk.fc2_weight, blk.fc2_bias))

    seq = _layer_norm(seq, model.final_ln_scale, model.final_ln_shift)
    cls = seq[0].astype(np.float64)
    return (cls @ model.head_weight.T.astype(np.float64) + model.head_bias.astype(np.float64)).astype(np.float32)
