"""Marginal composite likelihood over blocks of a hidden Markov model.

Consecutive observations are grouped into blocks of length l; each block's
marginal law (under the stationary latent initialisation) replaces one
likelihood factor.  Blocks are simulable independently of history, so they
behave as IID sites and the recycling moment estimator applies.  Blocks of
equal length share the same sampling law and hence a recycling pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBlockLength
from .gauss import NaturalGaussian
from .models.base import Simulator
from .models.sv import sv_sample_block_thetas
from .moments import SiteTarget


@dataclass(frozen=True)
class BlockScheme:
    """Contiguous partition of observation indices 1..n into blocks of length l."""

    l: int
    n_s: int
    ranges: tuple  # ((start, end) inclusive, 1-based)
    eta: tuple = field(default=())  # per-block weights, fixed to 1

    def __post_init__(self):
        if not self.eta:
            object.__setattr__(self, "eta", tuple(1.0 for _ in self.ranges))

    def length(self, s: int) -> int:
        start, end = self.ranges[s]
        return end - start + 1

    def slice(self, s: int) -> slice:
        start, end = self.ranges[s]
        return slice(start - 1, end)


def make_blocks(n: int, l: int) -> BlockScheme:
    """Blocks (l(s-1)+1 .. ls) for s = 1..ceil(n/l); the last may be shorter."""
    if not (1 <= l <= n):
        raise InvalidBlockLength(f"block length must satisfy 1 <= l <= {n}, got {l}")
    n_s = -(-n // l)
    ranges = tuple((l * (s - 1) + 1, min(l * s, n)) for s in range(1, n_s + 1))
    return BlockScheme(l=l, n_s=n_s, ranges=ranges)


class BlockSimulator(Simulator):
    """IID-site view of an HMM: chunk s is one simulated block of observations."""

    iid = True

    def __init__(self, scheme: BlockScheme, observed_series, block_sampler, d: int):
        self.scheme = scheme
        self.d = d
        self.n = scheme.n_s
        series = [float(np.atleast_1d(y)[0]) for y in observed_series]
        self.observed = [np.asarray(series[self.scheme.slice(s)], dtype=np.float64)
                         for s in range(scheme.n_s)]
        self._sampler = block_sampler

    def chunk_dim(self, s: int) -> int:
        return self.scheme.length(s)

    def pool_key(self, s: int):
        return self.scheme.length(s)

    def sample_chunk_batch(self, s, history, thetas, rng):
        return self._sampler(np.atleast_2d(np.asarray(thetas, dtype=np.float64)),
                             self.scheme.length(s), rng)


def sample_block(s: int, scheme: BlockScheme, native, rng, block_sampler=None) -> np.ndarray:
    """One observation block for block index s (1-based), given native parameters.

    Defaults to the stochastic-volatility model; a different HMM can supply
    its own (native, length, count, rng) sampler.
    """
    from .models.sv import sv_sample_block

    sampler = block_sampler if block_sampler is not None else sv_sample_block
    return sampler(native, scheme.length(s - 1), 1, rng)[0]


def composite_target(
    prior: NaturalGaussian,
    observed_series,
    scheme: BlockScheme,
    block_sampler=None,
    d: int = 4,
) -> SiteTarget:
    """SiteTarget whose n_s IID sites are the scheme's blocks.

    The acceptance kernel compares whole blocks (the base indicator over the
    concatenated block vector); per-block weights are fixed at one.
    """
    sampler = block_sampler if block_sampler is not None else sv_sample_block_thetas
    sim = BlockSimulator(scheme, observed_series, sampler, d)
    return SiteTarget(prior=prior, sim=sim, observed=sim.observed)
