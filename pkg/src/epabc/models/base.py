"""Common simulator interface: sample chunk i given history and theta.

A model exposes n data chunks that can be simulated sequentially, a summary
statistic per chunk (identity by default), and an acceptance weight in
[0, 1] comparing a simulated chunk against the observed one (the epsilon-ball
indicator by default).  IID models ignore the history argument and may share
one recycling pool across sites via pool_key.
"""

from __future__ import annotations

import numpy as np


def chunk_distance(a: np.ndarray, b: np.ndarray, norm: str) -> np.ndarray:
    """Rowwise distance between simulated summaries a (M, k) and observed b (k,)."""
    diff = np.atleast_2d(a) - np.asarray(b, dtype=np.float64)
    if norm == "euclidean":
        return np.sqrt(np.sum(diff * diff, axis=1))
    if norm == "supremum":
        return np.max(np.abs(diff), axis=1)
    raise ValueError(f"unknown norm {norm!r}")


class Simulator:
    """Base class; subclasses set d (parameter dim) and n (chunk count)."""

    d: int
    n: int
    iid: bool = False

    def chunk_dim(self, i: int) -> int:
        raise NotImplementedError

    def sample_chunk(self, i: int, history, theta: np.ndarray, rng: np.random.Generator):
        return self.sample_chunk_batch(i, history, np.atleast_2d(theta), rng)[0]

    def sample_chunk_batch(self, i: int, history, thetas: np.ndarray, rng: np.random.Generator):
        raise NotImplementedError

    def summary(self, i: int, chunk) -> np.ndarray:
        return np.asarray(chunk, dtype=np.float64)

    def summary_batch(self, i: int, chunks: np.ndarray) -> np.ndarray:
        return np.asarray(chunks, dtype=np.float64)

    def accept_weight(self, i: int, chunk, observed, epsilon: float, norm: str) -> float:
        return float(
            self.accept_weight_batch(i, np.atleast_2d(np.asarray(chunk)), observed, epsilon, norm)[0]
        )

    def accept_weight_batch(self, i, chunks, observed, epsilon: float, norm: str) -> np.ndarray:
        sims = self.summary_batch(i, chunks)
        obs = self.summary(i, observed)
        return (chunk_distance(sims, obs, norm) <= epsilon).astype(np.float64)

    def active_block(self, i: int):
        """Indices of the theta coordinates chunk i depends on, or None for all."""
        return None

    def pool_key(self, i: int):
        """Sites with equal keys draw chunks from the same law and may share a pool."""
        return 0 if self.iid else ("site", i)

    def observe(self, i: int, chunk, rng: np.random.Generator):
        """Map an internal simulated chunk to its observable form (default: identity)."""
        return chunk

    def simulate_dataset(self, theta: np.ndarray, rng: np.random.Generator) -> list:
        """Sequential simulation of all n chunks, conditioning on own history."""
        history: list = []
        out = []
        for i in range(self.n):
            chunk = self.sample_chunk(i, history, theta, rng)
            history.append(chunk)
            out.append(np.asarray(self.observe(i, chunk, rng), dtype=np.float64))
        return out
