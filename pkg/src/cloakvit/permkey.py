"""Keyed deterministic permutations.

A 256-bit secret key feeds two domain-separated SplitMix64 streams (one for
within-block pixel shuffling, one for block scrambling). Permutations are
produced by a rejection-sampled Fisher-Yates shuffle so that every language
and platform derives bit-identical tables from the same key.

Gather semantics are fixed package-wide: ``out[i] = in[perm[i]]``. Both the
image encryption and the matching model transformation go through this
module, which is what keeps the two sides consistent.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np

from .errors import KeyFormatError, ValidationError
from .fileio import atomic_write_text

KEY_BYTES = 32

SPLITMIX64_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


@dataclass(frozen=True)
class SecretKey:
    """32 raw octets; bytes 0-7 seed the pixel stream, 8-15 the block stream.

    Bytes 16-23 seed the pixel-value baseline scheme and 24-31 the trial-key
    derivation in equivalence checks; none of the last 16 bytes influence the
    block-wise scheme itself.
    """

    data: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.data, bytes) or len(self.data) != KEY_BYTES:
            raise KeyFormatError(
                f"secret key must be exactly {KEY_BYTES} bytes, got "
                f"{len(self.data) if isinstance(self.data, bytes) else type(self.data).__name__}"
            )

    @classmethod
    def from_hex(cls, text: str) -> "SecretKey":
        text = text.strip()
        if len(text) != 2 * KEY_BYTES:
            raise KeyFormatError(f"key hex must be {2 * KEY_BYTES} characters, got {len(text)}")
        try:
            return cls(bytes.fromhex(text))
        except ValueError as exc:
            raise KeyFormatError(f"key is not valid hex: {exc}") from exc

    @classmethod
    def generate(cls) -> "SecretKey":
        """Fresh key from OS entropy."""
        return cls(secrets.token_bytes(KEY_BYTES))

    @classmethod
    def from_seed(cls, seed: int) -> "SecretKey":
        """Reproducible key: four SplitMix64 outputs, little-endian."""
        state = seed & _MASK64
        words = []
        for _ in range(4):
            state, value = splitmix64_next(state)
            words.append(value)
        return cls(b"".join(w.to_bytes(8, "little") for w in words))

    def hex(self) -> str:
        return self.data.hex()

    @classmethod
    def read(cls, path: str) -> "SecretKey":
        with open(path, "r", encoding="ascii") as fh:
            return cls.from_hex(fh.read())

    def write(self, path: str) -> None:
        atomic_write_text(path, self.hex() + "\n")


def derive_seeds(key: SecretKey) -> tuple[int, int]:
    """(pixel_seed, block_seed) as little-endian reads of key bytes 0-7 / 8-15."""
    pixel_seed = int.from_bytes(key.data[0:8], "little")
    block_seed = int.from_bytes(key.data[8:16], "little")
    return pixel_seed, block_seed


def splitmix64_next(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (next_state, output), both 64-bit."""
    state = (state + SPLITMIX64_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, z


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """First *count* outputs of the stream, vectorized (uint64 array).

    SplitMix64 is counter-based (output i is a pure function of
    seed + i*gamma), so the bulk form is bit-identical to stepping
    :func:`splitmix64_next` *count* times.
    """
    if count < 0:
        raise ValidationError("count must be non-negative")
    with np.errstate(over="ignore"):
        idx = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(seed & _MASK64) + idx * np.uint64(SPLITMIX64_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def splitmix64_uniform(seed: int, count: int) -> np.ndarray:
    """*count* float64 values in [0, 1), from the top 53 bits of each output."""
    return (splitmix64_stream(seed, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


class Permutation:
    """Bijection on {0..n-1} stored as a gather table: out[i] = in[indices[i]]."""

    __slots__ = ("indices",)

    def __init__(self, indices) -> None:
        idx = np.asarray(indices, dtype=np.int64).copy()
        if idx.ndim != 1 or idx.size == 0:
            raise ValidationError("permutation must be a non-empty 1-d index array")
        if not np.array_equal(np.sort(idx), np.arange(idx.size, dtype=np.int64)):
            raise ValidationError("permutation indices are not a bijection on 0..n-1")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.indices, other.indices)

    def __repr__(self) -> str:
        return f"Permutation(n={len(self)})"

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n, dtype=np.int64))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.indices, np.arange(len(self), dtype=np.int64)))

    def apply(self, xs):
        """Gather *xs* along its first axis; sequences come back as lists."""
        if isinstance(xs, np.ndarray):
            if xs.shape[0] != len(self):
                raise ValidationError(f"length mismatch: permutation n={len(self)}, input {xs.shape[0]}")
            return xs[self.indices]
        xs = list(xs)
        if len(xs) != len(self):
            raise ValidationError(f"length mismatch: permutation n={len(self)}, input {len(xs)}")
        return [xs[i] for i in self.indices]

    def invert(self) -> "Permutation":
        inv = np.empty(len(self), dtype=np.int64)
        inv[self.indices] = np.arange(len(self), dtype=np.int64)
        return Permutation(inv)

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: compose(p, q).apply(x) == p.apply(q.apply(x))."""
        if len(self) != len(other):
            raise ValidationError("cannot compose permutations of different sizes")
        return Permutation(other.indices[self.indices])


def gen_permutation(seed: int, n: int) -> Permutation:
    """Deterministic Fisher-Yates shuffle of the identity array.

    For i = n-1 down to 1 the swap partner j is drawn uniformly from [0, i]
    by rejection: a 64-bit output r is rejected while
    r >= 2**64 - (2**64 % (i+1)), then j = r % (i+1). Rejection makes j
    exactly uniform, so the permutation distribution carries no modulo bias.
    """
    if n < 1:
        raise ValidationError("cannot generate a permutation over an empty domain (n must be >= 1)")
    arr = np.arange(n, dtype=np.int64)
    state = seed & _MASK64
    for i in range(n - 1, 0, -1):
        bound = i + 1
        threshold = 0x10000000000000000 - (0x10000000000000000 % bound)
        while True:
            state, r = splitmix64_next(state)
            if r < threshold:
                break
        j = r % bound
        arr[i], arr[j] = arr[j], arr[i]
    return Permutation(arr)
