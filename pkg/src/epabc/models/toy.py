"""IID Gaussian test models: a conjugate baseline and a folded-mean variant.

The conjugate model y ~ N(theta, sigma^2) has closed-form posteriors and is
the main correctness testbed.  The folded-mean model y ~ N(|theta|, 1) has a
symmetric bimodal posterior and exercises the diagnostics for inadequate
Gaussian approximations.
"""

from __future__ import annotations

import numpy as np

from .base import Simulator


class GaussianIID(Simulator):
    """y_i ~ N(theta, sigma^2), theta scalar."""

    d = 1
    iid = True

    def __init__(self, observed: np.ndarray, sigma: float = 1.0):
        self.observed = [np.atleast_1d(np.asarray(y, dtype=np.float64)) for y in observed]
        self.n = len(self.observed)
        self.sigma = float(sigma)

    def chunk_dim(self, i: int) -> int:
        return 1

    def sample_chunk_batch(self, i, history, thetas, rng):
        loc = np.atleast_2d(thetas)[:, 0]
        return (loc + self.sigma * rng.standard_normal(loc.shape[0]))[:, None]


class FoldedMeanIID(Simulator):
    """y_i ~ N(|theta|, 1), theta scalar; the posterior is symmetric bimodal."""

    d = 1
    iid = True

    def __init__(self, observed: np.ndarray):
        self.observed = [np.atleast_1d(np.asarray(y, dtype=np.float64)) for y in observed]
        self.n = len(self.observed)

    def chunk_dim(self, i: int) -> int:
        return 1

    def sample_chunk_batch(self, i, history, thetas, rng):
        loc = np.abs(np.atleast_2d(thetas)[:, 0])
        return (loc + rng.standard_normal(loc.shape[0]))[:, None]


def generate_gaussian_dataset(theta: float, n: int, rng, sigma: float = 1.0) -> list:
    return [np.array([theta + sigma * rng.standard_normal()]) for _ in range(n)]


def generate_folded_dataset(theta: float, n: int, rng) -> list:
    return [np.array([abs(theta) + rng.standard_normal()]) for _ in range(n)]
