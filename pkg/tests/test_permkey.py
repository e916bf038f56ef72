"""PRNG, key handling, and permutation machinery."""

import math

import numpy as np
import pytest

from cloakvit.errors import KeyFormatError, ValidationError
from cloakvit.permkey import (
    Permutation,
    SecretKey,
    derive_seeds,
    gen_permutation,
    splitmix64_next,
    splitmix64_stream,
    splitmix64_uniform,
)

from conftest import load_fixture


def test_splitmix64_golden_seed0():
    fx = load_fixture("splitmix64.json")
    state, outs = 0, []
    for _ in range(16):
        state, value = splitmix64_next(state)
        outs.append(f"{value:016x}")
    assert outs == fx["seed_0_first_16"]
    assert f"{state:016x}" != fx["seed_0_state_after_3"]  # 16 steps, not 3


def test_splitmix64_state_advances_by_gamma():
    fx = load_fixture("splitmix64.json")
    state = 0
    for _ in range(3):
        state, _ = splitmix64_next(state)
    assert f"{state:016x}" == fx["seed_0_state_after_3"]


@pytest.mark.parametrize("seed_name,seed", [("seed_1_first_8", 1), ("seed_max_first_8", (1 << 64) - 1)])
def test_splitmix64_golden_other_seeds(seed_name, seed):
    fx = load_fixture("splitmix64.json")
    assert [f"{v:016x}" for v in splitmix64_stream(seed, 8)] == fx[seed_name]


def test_splitmix64_is_pure():
    assert splitmix64_next(12345) == splitmix64_next(12345)


def test_stream_matches_scalar_stepping():
    # the vectorized counter form must be bit-identical to sequential stepping
    seed = 0xDEADBEEF12345678
    state, scalar = seed, []
    for _ in range(1000):
        state, value = splitmix64_next(state)
        scalar.append(value)
    assert splitmix64_stream(seed, 1000).tolist() == scalar


def test_uniform_range_and_determinism():
    u = splitmix64_uniform(99, 10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert np.array_equal(u, splitmix64_uniform(99, 10000))


def test_key_roundtrip_and_validation():
    key = SecretKey(bytes(range(32)))
    assert SecretKey.from_hex(key.hex()) == key
    assert len(key.hex()) == 64 and key.hex() == key.hex().lower()
    with pytest.raises(KeyFormatError):
        SecretKey(b"\x00" * 31)
    with pytest.raises(KeyFormatError):
        SecretKey.from_hex("ab" * 31)
    with pytest.raises(KeyFormatError):
        SecretKey.from_hex("zz" * 32)


def test_key_file_roundtrip(tmp_path):
    key = SecretKey.generate()
    path = str(tmp_path / "k.hex")
    key.write(path)
    text = open(path).read()
    assert text == key.hex() + "\n"
    assert SecretKey.read(path) == key


def test_derive_seeds_little_endian():
    assert derive_seeds(SecretKey(bytes(32))) == (0, 0)
    key = SecretKey(bytes(range(32)))
    assert derive_seeds(key) == (0x0706050403020100, 0x0F0E0D0C0B0A0908)


def test_reserved_bytes_do_not_affect_seeds():
    base = bytearray(range(32))
    other = bytearray(base)
    other[20] ^= 0xFF
    assert derive_seeds(SecretKey(bytes(base))) == derive_seeds(SecretKey(bytes(other)))


def test_gen_permutation_golden():
    fx = load_fixture("permutations.json")
    assert gen_permutation(0, 4).indices.tolist() == fx["n4_seed0"]
    assert gen_permutation(0, 196).indices.tolist() == fx["n196_seed0"]
    assert gen_permutation(0, 768).indices.tolist() == fx["n768_seed0"]
    assert (
        gen_permutation(0x0706050403020100, 768).indices.tolist()
        == fx["n768_seed_0x0706050403020100"]
    )


def test_gen_permutation_n1_and_errors():
    assert gen_permutation(12345, 1).indices.tolist() == [0]
    with pytest.raises(ValidationError):
        gen_permutation(0, 0)


def test_gen_permutation_bijection():
    zero_pixel_seed, _ = derive_seeds(SecretKey(bytes(32)))
    p = gen_permutation(zero_pixel_seed, 768)
    assert sorted(p.indices.tolist()) == list(range(768))


def test_gen_permutation_deterministic():
    for n in (2, 17, 768):
        assert gen_permutation(42, n) == gen_permutation(42, n)


def test_permutation_validation():
    with pytest.raises(ValidationError):
        Permutation([0, 0, 1])
    with pytest.raises(ValidationError):
        Permutation([1, 2, 3])
    with pytest.raises(ValidationError):
        Permutation([])


def test_invert():
    assert Permutation([0, 1, 2]).invert() == Permutation([0, 1, 2])
    assert Permutation([2, 0, 1]).invert() == Permutation([1, 2, 0])
    p = gen_permutation(7, 768)
    q = p.invert()
    assert q.indices[p.indices].tolist() == list(range(768))


def test_compose_with_inverse_is_identity():
    p = gen_permutation(3, 50)
    assert p.compose(p.invert()).is_identity()
    assert p.invert().compose(p).is_identity()


def test_apply_gather_semantics():
    p = Permutation([2, 0, 1])
    assert p.apply(["a", "b", "c"]) == ["c", "a", "b"]
    assert Permutation.identity(4).apply([1, 2, 3, 4]) == [1, 2, 3, 4]
    arr = np.arange(12).reshape(3, 4)
    assert np.array_equal(p.apply(arr), arr[[2, 0, 1]])


def test_apply_roundtrip_random():
    for seed in range(5):
        p = gen_permutation(seed, 257)
        xs = list(splitmix64_stream(seed + 100, 257))
        assert p.invert().apply(p.apply(xs)) == xs


def test_apply_length_mismatch():
    with pytest.raises(ValidationError):
        Permutation([1, 0]).apply([1, 2, 3])


def test_rejection_sampling_uniformity():
    """Over 1e5 seeds the n! permutations must be uniform to 5 sigma."""
    for n in (3, 5):
        counts = {}
        trials = 100_000
        for seed in range(trials):
            key = tuple(gen_permutation(seed, n).indices.tolist())
            counts[key] = counts.get(key, 0) + 1
        n_perms = math.factorial(n)
        assert len(counts) == n_perms, f"n={n}: only {len(counts)} of {n_perms} permutations seen"
        p = 1.0 / n_perms
        sigma = math.sqrt(trials * p * (1 - p))
        for perm, count in counts.items():
            dev = abs(count - trials * p)
            assert dev <= 5 * sigma, f"n={n}, perm {perm}: count {count} deviates {dev / sigma:.1f} sigma"
