"""Shared fixtures and deterministic image generators.

synthetic_image must stay in lockstep with the formula inlined in the
oracle scripts under tests/oracles/ (they are deliberately standalone);
golden tests pin the correspondence via sha256.
"""

import json
import pathlib

import numpy as np
import pytest

from cloakvit import ViTConfig, random_init
from cloakvit.permkey import splitmix64_uniform

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

TOY_CONFIG = ViTConfig(
    image_size=64, patch_size=16, embed_dim=64, depth=2, heads=4, mlp_ratio=4.0, num_classes=4
)


def load_fixture(name):
    with open(FIXTURES / name) as fh:
        return json.load(fh)


def synthetic_image(h, w):
    """Structured deterministic raster; same formula as the oracle scripts."""
    y, x = np.mgrid[0:h, 0:w]
    img = np.empty((h, w, 3), np.uint8)
    for c in range(3):
        img[:, :, c] = (13 * y + 7 * x + 101 * c + (y * x) % 31) % 256
    return img


def random_image(seed, h, w):
    """Full-range iid raster from the keyed PRNG (deterministic per seed)."""
    u = splitmix64_uniform(seed, h * w * 3)
    return (u * 256).astype(np.uint8).reshape(h, w, 3)


def smooth_image(seed, h, w):
    """Natural-ish smooth raster: three random sinusoids per channel."""
    u = splitmix64_uniform(seed, 27).reshape(3, 9)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.empty((h, w, 3), np.uint8)
    for c in range(3):
        p = u[c]
        v = (
            np.sin(2 * np.pi * (p[0] * 3 * xx / w + p[1] * 3 * yy / h + p[2]))
            + np.sin(2 * np.pi * (p[3] * 5 * xx / w + p[4] * 5 * yy / h + p[5]))
            + np.sin(2 * np.pi * (p[6] * 2 * xx / w + p[7] * 2 * yy / h + p[8]))
        )
        v = (v - v.min()) / (v.max() - v.min() + 1e-12)
        img[:, :, c] = np.round(v * 255).astype(np.uint8)
    return img


@pytest.fixture(scope="session")
def toy_config():
    return TOY_CONFIG


@pytest.fixture(scope="session")
def toy_model():
    return random_init(TOY_CONFIG, seed=7)
