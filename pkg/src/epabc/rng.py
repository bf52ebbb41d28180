"""Seed management: one 64-bit master seed, counter-based per-task streams."""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def child_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent Philox stream for a (seed, *path) address.

    The same address always yields the same stream, and distinct addresses
    yield statistically independent streams, so per-site randomness is
    reproducible regardless of how much any other site consumed.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
