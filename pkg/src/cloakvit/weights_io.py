"""Bit-exact weights container (.vtw).

Layout, all little-endian:

    magic "VTW1" (4 bytes)
    format version, u32
    JSON header length, u64
    JSON header: {"config": {...}, "tensors": [[name, [shape...]], ...]}
    concatenated tensor payloads, IEEE-754 binary32, in table order

The tensor table must match the canonical table derived from the config,
byte for byte, so a save/load round trip is the identity and two saves of
the same model are identical files on any platform.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import (
    BadMagicError,
    NonFiniteWeightsError,
    PayloadLengthError,
    ShapeTableError,
    UnsupportedVersionError,
    WeightsFormatError,
)
from .fileio import atomic_write_bytes
from .vit import ModelWeights, ViTConfig, expected_tensor_table, weights_from_arrays

MAGIC = b"VTW1"
FORMAT_VERSION = 1
_FIXED_HEADER = struct.Struct("<4sIQ")


def save_weights(model: ModelWeights, cfg: ViTConfig, path: str) -> None:
    """Serialize (model, cfg) to *path*; the write is atomic."""
    model.validate(cfg)
    table = [[name, list(shape)] for name, shape in expected_tensor_table(cfg)]
    header = json.dumps(
        {"config": cfg.to_dict(), "tensors": table}, separators=(",", ":"), sort_keys=True
    ).encode("utf-8")
    chunks = [_FIXED_HEADER.pack(MAGIC, FORMAT_VERSION, len(header)), header]
    for _, tensor in model.named_tensors():
        chunks.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_weights(path: str) -> tuple[ModelWeights, ViTConfig]:
    """Parse and fully validate a .vtw file; never returns a partial model."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _FIXED_HEADER.size:
        raise PayloadLengthError(f"{path}: file too short to hold a container header")
    magic, version, header_len = _FIXED_HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: format version {version} not supported (expected {FORMAT_VERSION})"
        )
    if _FIXED_HEADER.size + header_len > len(blob):
        raise PayloadLengthError(f"{path}: header length {header_len} exceeds file size")
    try:
        header = json.loads(blob[_FIXED_HEADER.size : _FIXED_HEADER.size + header_len])
        cfg_dict = header["config"]
        table = [(str(name), tuple(int(d) for d in shape)) for name, shape in header["tensors"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise WeightsFormatError(f"{path}: malformed JSON header ({exc})") from exc

    cfg = ViTConfig.from_dict(cfg_dict)
    expected = expected_tensor_table(cfg)
    if len(table) != len(expected):
        raise ShapeTableError(
            f"{path}: tensor table has {len(table)} entries, config requires {len(expected)}"
        )
    for (name, shape), (exp_name, exp_shape) in zip(table, expected):
        if name != exp_name:
            raise ShapeTableError(f"{path}: tensor {name!r} out of order, expected {exp_name!r}")
        if shape != exp_shape:
            raise ShapeTableError(f"{path}: tensor {name} has shape {shape}, expected {exp_shape}")

    payload = blob[_FIXED_HEADER.size + header_len :]
    expected_bytes = 4 * sum(int(np.prod(shape)) for _, shape in expected)
    if len(payload) != expected_bytes:
        raise PayloadLengthError(
            f"{path}: payload holds {len(payload)} bytes, tensor table requires {expected_bytes}"
        )

    arrays = {}
    offset = 0
    for name, shape in expected:
        size = int(np.prod(shape))
        tensor = (
            np.frombuffer(payload, dtype="<f4", count=size, offset=offset)
            .reshape(shape)
            .astype(np.float32, copy=True)
        )
        if not np.all(np.isfinite(tensor)):
            raise NonFiniteWeightsError(f"{path}: tensor {name} contains non-finite values")
        arrays[name] = tensor
        offset += 4 * size
    return weights_from_arrays(arrays, cfg), cfg


def weights_summary(path: str) -> dict:
    """Config, tensor table, and parameter count of a container, for reporting."""
    model, cfg = load_weights(path)
    return {
        "config": cfg.to_dict(),
        "tensors": [[name, list(t.shape)] for name, t in model.named_tensors()],
        "param_count": model.num_params,
    }
