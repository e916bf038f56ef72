"""Model transformation: the equivalence guarantee and its controls."""

import math

import numpy as np
import pytest

from cloakvit import (
    EncryptionParams,
    IMAGENET_NORMALIZATION,
    SecretKey,
    ViTConfig,
    encrypt_vit,
    forward,
    keyspace_bits,
    random_init,
    transform_model,
    verify_equivalence,
)
from cloakvit.errors import ValidationError
from cloakvit.permkey import Permutation
from cloakvit.transform import _transform_with_perms
from cloakvit.crypto import block_permutation, patch_permutation

from conftest import load_fixture, random_image

MIXED = EncryptionParams(16, "mixed")


def test_identity_permutations_leave_model_unchanged(toy_config, toy_model):
    out = _transform_with_perms(
        toy_model, Permutation.identity(768), Permutation.identity(toy_config.num_patches)
    )
    for (name, a), (_, b) in zip(toy_model.named_tensors(), out.named_tensors()):
        assert np.array_equal(a, b), name


def test_only_two_tensors_change(toy_config, toy_model):
    key = SecretKey.from_seed(5)
    out = transform_model(toy_model, toy_config, key, MIXED)
    changed = [
        name
        for (name, a), (_, b) in zip(toy_model.named_tensors(), out.named_tensors())
        if not np.array_equal(a, b)
    ]
    assert changed == ["patch_embed.weight", "pos_embed"]


def test_class_token_position_row_pinned(toy_config, toy_model):
    out = transform_model(toy_model, toy_config, SecretKey.from_seed(6), MIXED)
    assert np.array_equal(out.pos_embed[0], toy_model.pos_embed[0])


def test_equivalence_on_toy_model(toy_config, toy_model):
    """Logits on (transformed model, encrypted image) match the plain pair."""
    key = SecretKey.from_seed(42)
    img = random_image(42, 64, 64)
    plain = forward(toy_model, toy_config, img)
    enc = forward(
        transform_model(toy_model, toy_config, key, MIXED),
        toy_config,
        encrypt_vit(img, key, MIXED),
    )
    assert float(np.max(np.abs(enc - plain))) <= 1e-5
    assert enc.argmax() == plain.argmax()


def test_equivalence_per_channel_with_imagenet_norm():
    cfg = ViTConfig(
        image_size=64, patch_size=16, embed_dim=64, depth=2, heads=4,
        mlp_ratio=4.0, num_classes=4, norm=IMAGENET_NORMALIZATION,
    )
    params = EncryptionParams(16, "per-channel")
    for t in range(5):
        model = random_init(cfg, seed=20000 + t)
        img = random_image(21000 + t, 64, 64)
        key = SecretKey.from_seed(22000 + t)
        plain = forward(model, cfg, img)
        enc = forward(transform_model(model, cfg, key, params), cfg, encrypt_vit(img, key, params))
        assert float(np.max(np.abs(enc - plain))) <= 1e-5


def test_mixed_mode_requires_uniform_normalization(toy_model):
    cfg = ViTConfig(
        image_size=64, patch_size=16, embed_dim=64, depth=2, heads=4,
        mlp_ratio=4.0, num_classes=4, norm=IMAGENET_NORMALIZATION,
    )
    with pytest.raises(ValidationError, match="channel-uniform"):
        transform_model(toy_model, cfg, SecretKey.from_seed(1), MIXED)


def test_block_size_must_match_patch_size(toy_config, toy_model):
    with pytest.raises(ValidationError, match="block size"):
        transform_model(toy_model, toy_config, SecretKey.from_seed(1), EncryptionParams(8, "mixed"))


def test_transform_is_invertible_relabeling(toy_config, toy_model):
    key = SecretKey.from_seed(13)
    pix = patch_permutation(key, MIXED)
    blk = block_permutation(key, toy_config.num_patches)
    transformed = _transform_with_perms(toy_model, pix, blk)
    restored = _transform_with_perms(transformed, pix.invert(), blk.invert())
    for (name, a), (_, b) in zip(toy_model.named_tensors(), restored.named_tensors()):
        assert np.array_equal(a, b), name


def test_wrong_key_diverges(toy_config):
    """Transform under K, encrypt under K' != K: logits must break."""
    over_threshold, disagreements = 0, 0
    for t in range(10):
        s = 2000 + t
        model = random_init(toy_config, seed=s)
        img = random_image(s + 100000, 64, 64)
        k_model = SecretKey.from_seed(s + 200000)
        k_image = SecretKey.from_seed(s + 300000)
        plain = forward(model, toy_config, img)
        wrong = forward(
            transform_model(model, toy_config, k_model, MIXED),
            toy_config,
            encrypt_vit(img, k_image, MIXED),
        )
        if float(np.max(np.abs(wrong - plain))) > 1e-2:
            over_threshold += 1
        if wrong.argmax() != plain.argmax():
            disagreements += 1
    assert over_threshold >= 9, f"only {over_threshold}/10 trials exceeded 1e-2"
    assert disagreements >= 1, "wrong key never changed the predicted class"


def test_keyspace_bits_against_oracle():
    fx = load_fixture("keyspace.json")
    cases = [
        (224, EncryptionParams(16, "mixed"), "mixed_m16_img224_c3"),
        (224, EncryptionParams(16, "per-channel"), "per_channel_m16_img224_c3"),
        (64, EncryptionParams(16, "mixed"), "mixed_m16_img64_c3"),
        (224, EncryptionParams(32, "mixed"), "mixed_m32_img224_c3"),
    ]
    for image_size, params, name in cases:
        expected = float(fx[name])
        got = keyspace_bits(image_size, params)
        assert got == pytest.approx(expected, rel=1e-6), name


def test_keyspace_single_permutation_is_zero_bits():
    assert keyspace_bits(1, EncryptionParams(1, "per-channel")) == 0.0


def test_keyspace_monotone_in_block_size():
    b16 = keyspace_bits(224, EncryptionParams(16, "mixed"))
    b32 = keyspace_bits(224, EncryptionParams(32, "mixed"))
    # larger blocks: D! grows much faster than N! shrinks
    expected = (
        math.lgamma(32 * 32 * 3 + 1) + math.lgamma(49 + 1) - math.lgamma(768 + 1) - math.lgamma(196 + 1)
    ) / math.log(2)
    assert b32 - b16 == pytest.approx(expected, rel=1e-9)
    assert b32 > b16


def test_keyspace_rejects_non_divisible():
    with pytest.raises(ValidationError):
        keyspace_bits(100, EncryptionParams(16, "mixed"))


def test_verify_equivalence_report(toy_config, toy_model):
    report = verify_equivalence(
        toy_model, toy_config, SecretKey.from_seed(50), random_image(50, 64, 64), trials=3
    )
    assert report.passed
    assert len(report.trials) == 3
    assert report.argmax_agreement == 1.0
    assert report.max_abs_delta <= 1e-5
    # derived trial keys are distinct and deterministic
    hexes = [t.key_hex for t in report.trials]
    assert len(set(hexes)) == 3
    again = verify_equivalence(
        toy_model, toy_config, SecretKey.from_seed(50), random_image(50, 64, 64), trials=3
    )
    assert [t.key_hex for t in again.trials] == hexes
