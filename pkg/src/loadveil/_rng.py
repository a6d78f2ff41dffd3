"""Seed handling shared by every randomized component.

The only contract is determinism: the same seed (plus derivation keys)
always yields the same stream. Signed seeds are mapped to the unsigned
64-bit space numpy's SeedSequence accepts.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def seed_key(seed: int) -> int:
    """Map an arbitrary integer seed to a nonnegative 64-bit key."""
    return int(seed) & _MASK64


def derive_rng(seed: int, *subkeys: int) -> np.random.Generator:
    """Generator for (seed, *subkeys); distinct subkeys give independent streams."""
    return np.random.default_rng([seed_key(seed), *[int(k) & _MASK64 for k in subkeys]])


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(seed_key(int(rng)))
