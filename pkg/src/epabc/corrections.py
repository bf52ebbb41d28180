"""Low-dimensional site updates and first-order perturbative marginal correction.

Two independent pieces live here.

* ``lift_marginal_moments`` recovers full-dimensional hybrid moments from the
  moments of z = A theta when a site's likelihood depends on theta only
  through A theta.  Sampling then happens in the (much smaller) z space.

* ``pwo_first_order`` builds a corrected posterior marginal from the final
  Gaussian approximation q and the per-site hybrid samples: a mixture with
  weight (n-1) on q's marginal and weight 1 on each site's weighted empirical
  hybrid marginal.  Departures of the mixture from q (e.g. bimodality) flag
  that the Gaussian approximation is inadequate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import ndtr

from .errors import EmptyHybridSample, SingularProjection
from .gauss import MomentGaussian


@dataclass(frozen=True)
class ProjectionSpec:
    """Full-row-rank matrix A mapping theta (dim d) to the site-active z = A theta."""

    A: np.ndarray

    def __post_init__(self):
        a = np.array(self.A, dtype=np.float64, copy=True)
        if a.ndim != 2:
            raise ValueError("projection must be a matrix")
        object.__setattr__(self, "A", a)

    @staticmethod
    def from_indices(indices, d: int) -> "ProjectionSpec":
        idx = np.asarray(indices, dtype=int)
        a = np.zeros((idx.shape[0], d))
        a[np.arange(idx.shape[0]), idx] = 1.0
        return ProjectionSpec(a)


def lift_marginal_moments(
    proj: ProjectionSpec, cavity: MomentGaussian, z_moments: MomentGaussian
) -> MomentGaussian:
    """Full-dimensional hybrid moments from marginal hybrid moments of z = A theta.

    With cavity (mu0, Sigma0) and V = Sigma0 A^t (A Sigma0 A^t)^{-1},
    b = mu0 - V A mu0:

        E(theta)   = V E(z) + b
        Cov(theta) = (I - V A) Sigma0 + V Cov(z) V^t
    """
    a = proj.A
    m, d = a.shape
    if d != cavity.d or m != z_moments.d:
        raise ValueError(f"projection shape {a.shape} incompatible with dims {cavity.d}/{z_moments.d}")
    s_at = cavity.Sigma @ a.T
    proj_cov = a @ s_at
    try:
        l = np.linalg.cholesky(0.5 * (proj_cov + proj_cov.T))
    except np.linalg.LinAlgError as exc:
        raise SingularProjection("projected cavity covariance is singular (A not full row rank?)") from exc
    diag = np.diag(l)
    if diag.min() < 1e-7 * diag.max():
        raise SingularProjection("projected cavity covariance is numerically rank deficient")
    # V = Sigma0 A^t (A Sigma0 A^t)^{-1}, via two triangular solves
    v = cho_solve((l, True), s_at.T, check_finite=False).T
    b = cavity.mu - v @ (a @ cavity.mu)
    mean = v @ z_moments.mu + b
    cov = (np.eye(d) - v @ a) @ cavity.Sigma + v @ z_moments.Sigma @ v.T
    return MomentGaussian(mean, cov)


@dataclass
class HybridSample:
    """Positive-weight draws from one site's hybrid, restricted to some coordinates."""

    coords: np.ndarray   # theta coordinates the value columns refer to
    values: np.ndarray   # (m, len(coords))
    weights: np.ndarray  # (m,), all > 0


@dataclass
class PWOAccumulator:
    """Final-pass hybrid material needed by the first-order marginal correction."""

    n_sites: int
    q: MomentGaussian | None = None
    z_q: float = 1.0
    z: dict = field(default_factory=dict)        # site -> hybrid normaliser estimate
    samples: dict = field(default_factory=dict)  # site -> HybridSample

    def record(self, site: int, coords, values, weights, z_hat: float) -> None:
        coords = np.asarray(coords, dtype=int)
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        weights = np.asarray(weights, dtype=np.float64)
        keep = weights > 0.0
        self.samples[site] = HybridSample(coords, values[keep], weights[keep])
        self.z[site] = float(z_hat)


@dataclass
class CorrectedMarginal:
    grid: np.ndarray
    q_cdf: np.ndarray
    corrected_cdf_raw: np.ndarray
    corrected_cdf: np.ndarray
    density: np.ndarray
    monotonicity_violation: float


def _weighted_cdf(values: np.ndarray, weights: np.ndarray, grid: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    pos = np.searchsorted(v, grid, side="right")
    return np.concatenate(([0.0], cw))[pos]


def default_grid(q: MomentGaussian, coord: int, points: int = 512) -> np.ndarray:
    sd = float(np.sqrt(q.Sigma[coord, coord]))
    mu = float(q.mu[coord])
    return np.linspace(mu - 6.0 * sd, mu + 6.0 * sd, points)


def pwo_first_order(acc: PWOAccumulator, coord: int, grid: np.ndarray) -> CorrectedMarginal:
    """Corrected CDF/density of one coordinate on a fixed evaluation grid.

    Corrected CDF at a grid point t:

        [(n-1) * Phi_q(t) + sum_i F_i(t)] / [(n-1) + n]

    where Phi_q is the CDF of q's coordinate marginal and F_i the weighted
    empirical CDF of site i's hybrid draws.  Every site contributes with the
    same mass as q: sites are normalised so each hybrid term integrates to
    one, which keeps the mixture a proper CDF.      With a single site the q
    term vanishes and the correction returns that site's hybrid outright.
    """
    if acc.q is None:
        raise ValueError("accumulator has no global approximation attached")
    grid = np.asarray(grid, dtype=np.float64)
    n = acc.n_sites
    mu = float(acc.q.mu[coord])
    sd = float(np.sqrt(acc.q.Sigma[coord, coord]))
    q_cdf = ndtr((grid - mu) / sd)

    total = (n - 1.0) * q_cdf
    for site in range(n):
        sample = acc.samples.get(site)
        if sample is None or sample.weights.size == 0:
            raise EmptyHybridSample(f"site {site} retained no accepted draws for the correction")
        cols = np.flatnonzero(sample.coords == coord)
        if cols.size == 0:
            raise EmptyHybridSample(f"site {site} did not harvest coordinate {coord}")
        total += _weighted_cdf(sample.values[:, cols[0]], sample.weights, grid)
    raw = total / (2.0 * n - 1.0)

    diffs = np.diff(raw)
    violation = float(max(0.0, -diffs.min())) if diffs.size else 0.0
    clipped = np.clip(np.maximum.accumulate(raw), 0.0, 1.0)

    density = np.empty_like(clipped)
    density[1:-1] = (clipped[2:] - clipped[:-2]) / (grid[2:] - grid[:-2])
    density[0] = (clipped[1] - clipped[0]) / (grid[1] - grid[0])
    density[-1] = (clipped[-1] - clipped[-2]) / (grid[-1] - grid[-2])
    return CorrectedMarginal(grid, q_cdf, raw, clipped, density, violation)
