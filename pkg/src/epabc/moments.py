"""Simulation-based estimates of hybrid-distribution moments.

Given a Gaussian cavity and one data chunk, the hybrid is the cavity times
the chunk's intractable likelihood factor.  Its normaliser and first two
moments are estimated from simulated pairs (theta, y): theta from the cavity
(optionally quasi-Monte Carlo), y from the model, weighted by the acceptance
kernel (an epsilon-ball indicator, or a model-supplied smoothed weight in
[0, 1]).

Two estimators are provided: a fresh-simulation estimator with adaptive
batching (draw batches until the accepted mass reaches a threshold), and a
recycling estimator for IID sites that reuses one pool of pairs across sites
through importance weights, regenerating the pool when the effective sample
size degrades.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Optional

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .corrections import ProjectionSpec, lift_marginal_moments
from .errors import DimensionTooLarge, DomainError, TableExhausted, ZeroAcceptance
from .gauss import LOG_2PI, MomentGaussian, NaturalGaussian, cholesky_spd, std_normal_inverse_cdf

_PRIMES = (
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
    73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151,
    157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229, 233,
    239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311,
)


def _radical_inverse(indices: np.ndarray, base: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64).copy()
    out = np.zeros(idx.shape, dtype=np.float64)
    f = 1.0 / base
    while np.any(idx > 0):
        out += f * (idx % base)
        idx //= base
        f /= base
    return out


def halton_block(start: int, count: int, dim: int) -> np.ndarray:
    """Rows start..start+count-1 of the Halton sequence (1-based indexing)."""
    if dim > len(_PRIMES):
        raise DimensionTooLarge(f"at most {len(_PRIMES)} Halton dimensions are precomputed")
    if start < 1 or count < 1:
        raise ValueError("start must be >= 1 and count >= 1")
    indices = np.arange(start, start + count, dtype=np.int64)
    return np.column_stack([_radical_inverse(indices, _PRIMES[j]) for j in range(dim)])


def halton(index: int, dim: int) -> np.ndarray:
    """Point `index` (1-based) of the Halton sequence in (0,1)^dim.

    Coordinate j is the radical inverse of `index` in the j-th prime base;
    starting the indexing at 1 keeps every coordinate strictly positive.
    """
    return halton_block(index, 1, dim)[0]


class QmcTable:
    """Precomputed Phi^{-1}(Halton) rows, generated once and consumed in order.

    Successive requests take successive segments, so distinct site updates
    see distinct portions of the sequence; the cursor wraps to the start when
    the remainder is too short.  A single request larger than the whole table
    raises TableExhausted.
    """

    def __init__(self, length: int, dim: int):
        self.length = int(length)
        self.dim = int(dim)
        self.values = std_normal_inverse_cdf(halton_block(1, self.length, self.dim))
        self.cursor = 0

    def take(self, count: int, dim: Optional[int] = None) -> np.ndarray:
        dim = self.dim if dim is None else dim
        if dim > self.dim:
            raise DimensionTooLarge(f"table holds {self.dim} dimensions, {dim} requested")
        if count > self.length:
            raise TableExhausted(f"requested {count} rows from a table of {self.length}")
        if self.cursor + count > self.length:
            self.cursor = 0
        rows = self.values[self.cursor:self.cursor + count, :dim]
        self.cursor += count
        return rows

    def reset(self) -> None:
        self.cursor = 0


def qmc_gaussian_draws(cavity: MomentGaussian, count: int, table: QmcTable) -> np.ndarray:
    """mu + L z for the next `count` table rows z, with L L^t = Sigma."""
    z = table.take(count, cavity.d)
    l, _ = cholesky_spd(cavity.Sigma, "cavity covariance")
    return cavity.mu + z @ l.T


def gaussian_draws(cavity: MomentGaussian, count: int, rng: np.random.Generator) -> np.ndarray:
    l, _ = cholesky_spd(cavity.Sigma, "cavity covariance")
    return cavity.mu + rng.standard_normal((count, cavity.d)) @ l.T


def ess(weights: np.ndarray) -> float:
    """Effective sample size (sum w)^2 / sum w^2; zero for all-zero weights.

    Weights are normalised by their maximum first, which makes the value
    scale-free (exactly so for power-of-two rescalings) and immune to
    overflow from extreme importance ratios.
    """
    w = np.asarray(weights, dtype=np.float64)
    top = w.max() if w.size else 0.0
    if top <= 0.0:
        return 0.0
    w = w / top
    s = w.sum()
    return float(s * s / (w @ w))


def ball_log_volume(epsilon: float, dim: int, norm: str = "euclidean") -> float:
    """log volume of the radius-epsilon ball in R^dim for the given norm."""
    if epsilon <= 0.0:
        raise DomainError("epsilon must be positive")
    if norm == "euclidean":
        return 0.5 * dim * np.log(np.pi) - float(gammaln(0.5 * dim + 1.0)) + dim * np.log(epsilon)
    if norm == "supremum":
        return dim * np.log(2.0 * epsilon)
    raise ValueError(f"unknown norm {norm!r}")


@dataclass
class SamplingConfig:
    """Tunables of the moment estimators.

    m_cap bounds the total fresh draws in one site update; when it is hit
    with nonzero accepted mass the (noisier) partial estimate is returned,
    and with zero mass ZeroAcceptance is raised.
    """

    epsilon: float
    m_batch: int = 5000
    m_min: int = 2000
    m_cap: Optional[int] = None
    ess_min: float = 500.0
    norm: str = "euclidean"
    use_qmc: bool = True
    qmc_table_len: int = 2 ** 17

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.m_min < 1 or self.m_batch < 1:
            raise ValueError("m_min and m_batch must be >= 1")
        if self.ess_min < 1.0:
            raise ValueError("ess_min must be >= 1")
        if self.norm not in ("euclidean", "supremum"):
            raise ValueError(f"unknown norm {self.norm!r}")

    @property
    def resolved_m_cap(self) -> int:
        return int(self.m_cap) if self.m_cap is not None else 10_000 * self.m_min


@dataclass
class MomentEstimate:
    """Stochastic hybrid moments: normaliser, mean, covariance, and bookkeeping.

    m_total counts fresh simulations consumed by the call that produced the
    estimate (zero when a recycled pool was only re-weighted); m_acc is the
    accepted mass, an integer count for indicator kernels.
    """

    z_hat: float
    mu_hat: np.ndarray
    sigma_hat: np.ndarray
    m_total: int
    m_acc: float
    ess: Optional[float] = None
    log_z: Optional[float] = None
    samples: Optional[tuple[np.ndarray, np.ndarray]] = None  # accepted draws, weights
    coords: Optional[np.ndarray] = None                      # theta coords of sample columns


@dataclass
class ParticlePool:
    """Reusable simulated pairs plus the cavity under which they were drawn.

    thetas live in the site-active subspace (the full space when sites depend
    on every coordinate); key identifies which sites may share the pool.
    """

    thetas: np.ndarray
    chunks: np.ndarray
    anchor: MomentGaussian
    key: Hashable


@dataclass
class SiteTarget:
    """What EP needs from a model: a Gaussian prior and n observed chunks."""

    prior: NaturalGaussian
    sim: object
    observed: list

    @property
    def n(self) -> int:
        return len(self.observed)


def _site_subspace(cavity: MomentGaussian, sim, site: int):
    """Restrict the cavity to the coordinates the site actually depends on."""
    idx = sim.active_block(site)
    if idx is None:
        return None, cavity
    idx = np.asarray(idx, dtype=int)
    if idx.shape[0] >= cavity.d:
        return None, cavity
    sub = MomentGaussian(cavity.mu[idx], cavity.Sigma[np.ix_(idx, idx)])
    return idx, sub


def _embed_thetas(thetas_z: np.ndarray, idx, cavity: MomentGaussian) -> np.ndarray:
    if idx is None:
        return thetas_z
    full = np.tile(cavity.mu, (thetas_z.shape[0], 1))
    full[:, idx] = thetas_z
    return full


def _simulate(sim, site: int, history, thetas: np.ndarray, rng, threads: int) -> np.ndarray:
    m = thetas.shape[0]
    if threads <= 1 or m < 2 * threads:
        return np.asarray(sim.sample_chunk_batch(site, history, thetas, rng))
    bounds = np.linspace(0, m, threads + 1).astype(int)
    rngs = rng.spawn(threads)

    def work(k):
        return np.asarray(sim.sample_chunk_batch(site, history, thetas[bounds[k]:bounds[k + 1]], rngs[k]))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(work, range(threads)))
    return np.concatenate(parts, axis=0)


def _gaussian_logpdf_rows(x: np.ndarray, mom: MomentGaussian) -> np.ndarray:
    l, _ = cholesky_spd(mom.Sigma, "pool anchor covariance")
    l_inv = solve_triangular(l, np.eye(mom.d), lower=True, check_finite=False)
    z = (x - mom.mu) @ l_inv.T
    quad = np.einsum("ij,ij->i", z, z)
    half_logdet = float(np.sum(np.log(np.diag(l))))
    return -0.5 * quad - half_logdet - 0.5 * mom.d * LOG_2PI


class _Accumulator:
    """Weighted sums around a fixed centre, for numerically stable moments."""

    def __init__(self, dz: int, centre: np.ndarray, keep_samples: bool):
        self.centre = centre
        self.mass = 0.0
        self.swx = np.zeros(dz)
        self.swxx = np.zeros((dz, dz))
        self.total = 0
        self.keep = keep_samples
        self.kept_thetas: list[np.ndarray] = []
        self.kept_weights: list[np.ndarray] = []

    def add(self, thetas_z: np.ndarray, weights: np.ndarray) -> None:
        self.total += thetas_z.shape[0]
        pos = weights > 0.0
        if not np.any(pos):
            return
        th = thetas_z[pos] - self.centre
        w = weights[pos]
        self.mass += float(w.sum())
        self.swx += w @ th
        self.swxx += th.T @ (w[:, None] * th)
        if self.keep:
            self.kept_thetas.append(thetas_z[pos])
            self.kept_weights.append(w)

    def moments(self) -> MomentGaussian:
        mean_c = self.swx / self.mass
        cov = self.swxx / self.mass - np.outer(mean_c, mean_c)
        return MomentGaussian(self.centre + mean_c, 0.5 * (cov + cov.T))

    def samples(self):
        if not self.keep or not self.kept_thetas:
            return None
        return np.concatenate(self.kept_thetas, axis=0), np.concatenate(self.kept_weights)


def _finalise(cavity, idx, cavity_z, acc: _Accumulator, z_hat, m_total, extra_ess=None):
    z_mom = acc.moments()
    if idx is None:
        mu, sigma = z_mom.mu, z_mom.Sigma
    else:
        lifted = lift_marginal_moments(ProjectionSpec.from_indices(idx, cavity.d), cavity, z_mom)
        mu, sigma = lifted.mu, lifted.Sigma
    coords = idx if idx is not None else np.arange(cavity.d)
    return MomentEstimate(
        z_hat=float(z_hat),
        mu_hat=mu,
        sigma_hat=sigma,
        m_total=int(m_total),
        m_acc=float(acc.mass),
        ess=extra_ess,
        samples=acc.samples(),
        coords=coords,
    )


def estimate_moments_basic(
    cavity: MomentGaussian,
    sim,
    site: int,
    history,
    observed_chunk,
    cfg: SamplingConfig,
    rng: np.random.Generator,
    table: Optional[QmcTable] = None,
    keep_samples: bool = False,
    threads: int = 1,
) -> MomentEstimate:
    """Fresh-simulation moment estimate with adaptive batching.

    Draws batches of (theta, y) pairs, theta from the cavity (QMC when a
    table is supplied and cfg.use_qmc), until the accepted mass reaches
    cfg.m_min or the total reaches cfg.m_cap.  Returns the kernel-weighted
    normaliser, mean and covariance.
    """
    idx, cavity_z = _site_subspace(cavity, sim, site)
    acc = _Accumulator(cavity_z.d, cavity_z.mu, keep_samples)
    m_cap = cfg.resolved_m_cap
    while acc.mass < cfg.m_min and acc.total < m_cap:
        count = min(cfg.m_batch, m_cap - acc.total)
        if cfg.use_qmc and table is not None:
            thetas_z = qmc_gaussian_draws(cavity_z, count, table)
        else:
            thetas_z = gaussian_draws(cavity_z, count, rng)
        thetas_full = _embed_thetas(thetas_z, idx, cavity)
        chunks = _simulate(sim, site, history, thetas_full, rng, threads)
        weights = np.asarray(sim.accept_weight_batch(site, chunks, observed_chunk, cfg.epsilon, cfg.norm))
        acc.add(thetas_z, weights)
    if acc.mass <= 0.0:
        raise ZeroAcceptance(
            f"site {site}: no accepted draws among {acc.total} (epsilon={cfg.epsilon} too small?)"
        )
    return _finalise(cavity, idx, cavity_z, acc, acc.mass / acc.total, acc.total)


def _regenerate_pool(
    cavity_z: MomentGaussian,
    idx,
    cavity: MomentGaussian,
    sim,
    site: int,
    history,
    observed_chunk,
    cfg: SamplingConfig,
    rng: np.random.Generator,
    table: Optional[QmcTable],
    threads: int,
) -> ParticlePool:
    thetas_parts, chunk_parts = [], []
    mass = 0.0
    total = 0
    m_cap = cfg.resolved_m_cap
    while mass < cfg.m_min and total < m_cap:
        count = min(cfg.m_batch, m_cap - total)
        if cfg.use_qmc and table is not None:
            thetas_z = qmc_gaussian_draws(cavity_z, count, table)
        else:
            thetas_z = gaussian_draws(cavity_z, count, rng)
        thetas_full = _embed_thetas(thetas_z, idx, cavity)
        chunks = _simulate(sim, site, history, thetas_full, rng, threads)
        w = np.asarray(sim.accept_weight_batch(site, chunks, observed_chunk, cfg.epsilon, cfg.norm))
        mass += float(w.sum())
        total += count
        thetas_parts.append(thetas_z)
        chunk_parts.append(np.asarray(chunks))
    return ParticlePool(
        thetas=np.concatenate(thetas_parts, axis=0),
        chunks=np.concatenate(chunk_parts, axis=0),
        anchor=cavity_z,
        key=sim.pool_key(site),
    )


def estimate_moments_recycled(
    pool: Optional[ParticlePool],
    cavity: MomentGaussian,
    sim,
    site: int,
    history,
    observed_chunk,
    cfg: SamplingConfig,
    rng: np.random.Generator,
    table: Optional[QmcTable] = None,
    keep_samples: bool = False,
    threads: int = 1,
) -> tuple[MomentEstimate, ParticlePool]:
    """Importance-reweighted moment estimate over a reusable pool of pairs.

    Weights are the Gaussian density ratio of the current cavity to the
    pool's generation-time cavity, times the acceptance kernel at this site's
    observation.  When the effective sample size of those weights drops below
    cfg.ess_min (or the pool is missing/incompatible), the pool is
    regenerated from the current cavity, making the density ratio identically
    one.  The returned normaliser is (sum of weights)/(pool size).
    """
    idx, cavity_z = _site_subspace(cavity, sim, site)
    fresh = 0
    key = sim.pool_key(site)

    def pool_weights(p: ParticlePool) -> np.ndarray:
        kern = np.asarray(sim.accept_weight_batch(site, p.chunks, observed_chunk, cfg.epsilon, cfg.norm))
        if np.array_equal(p.anchor.mu, cavity_z.mu) and np.array_equal(p.anchor.Sigma, cavity_z.Sigma):
            return kern
        # the density ratio only matters where the kernel is nonzero
        pos = np.flatnonzero(kern > 0.0)
        w = np.zeros(kern.shape[0])
        if pos.size:
            sub = p.thetas[pos]
            log_ratio = _gaussian_logpdf_rows(sub, cavity_z) - _gaussian_logpdf_rows(sub, p.anchor)
            w[pos] = np.exp(log_ratio) * kern[pos]
        return w

    regenerated = False
    if pool is None or pool.key != key:
        pool = _regenerate_pool(cavity_z, idx, cavity, sim, site, history, observed_chunk, cfg, rng, table, threads)
        fresh = pool.thetas.shape[0]
        regenerated = True
    weights = pool_weights(pool)
    current_ess = ess(weights)
    if not regenerated and current_ess < cfg.ess_min:
        pool = _regenerate_pool(cavity_z, idx, cavity, sim, site, history, observed_chunk, cfg, rng, table, threads)
        fresh = pool.thetas.shape[0]
        weights = pool_weights(pool)
        current_ess = ess(weights)
    if weights.sum() <= 0.0:
        raise ZeroAcceptance(f"site {site}: pool of {pool.thetas.shape[0]} has zero accepted mass")

    acc = _Accumulator(cavity_z.d, cavity_z.mu, keep_samples)
    acc.add(pool.thetas, weights)
    acc.total = pool.thetas.shape[0]
    est = _finalise(cavity, idx, cavity_z, acc, weights.sum() / pool.thetas.shape[0], fresh, current_ess)
    return est, pool


class BasicMomentOracle:
    """Adapter giving the EP loop fresh-simulation moment estimates per site."""

    def __init__(self, target: SiteTarget, cfg: SamplingConfig, table: Optional[QmcTable] = None,
                 threads: int = 1, collect_final_pass: bool = False):
        self.target = target
        self.cfg = cfg
        self.table = table if table is not None else (
            QmcTable(cfg.qmc_table_len, target.sim.d) if cfg.use_qmc else None
        )
        self.threads = threads
        self.collect_final_pass = collect_final_pass
        self.keep_samples = False
        self.sims_total = 0
        self.sims_by_pass: dict[int, int] = {}
        self._pass = 1
        self.harvest: dict[int, tuple] = {}

    def begin_pass(self, pass_index: int, total_passes: int) -> None:
        self._pass = pass_index
        self.sims_by_pass.setdefault(pass_index, 0)
        self.keep_samples = self.collect_final_pass and pass_index == total_passes

    def _record(self, site: int, est: MomentEstimate) -> None:
        self.sims_total += est.m_total
        self.sims_by_pass[self._pass] = self.sims_by_pass.get(self._pass, 0) + est.m_total
        if self.keep_samples and est.samples is not None:
            thetas, weights = est.samples
            self.harvest[site] = (est.coords, thetas, weights, est.z_hat)

    def __call__(self, cavity: MomentGaussian, site: int, rng: np.random.Generator) -> MomentEstimate:
        t = self.target
        est = estimate_moments_basic(
            cavity, t.sim, site, t.observed[:site], t.observed[site], self.cfg, rng,
            table=self.table, keep_samples=self.keep_samples, threads=self.threads,
        )
        self._record(site, est)
        return est


class RecycledMomentOracle(BasicMomentOracle):
    """Pool-recycling variant for IID sites; pools are kept per compatibility key."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.pools: dict[Hashable, ParticlePool] = {}

    def __call__(self, cavity: MomentGaussian, site: int, rng: np.random.Generator) -> MomentEstimate:
        t = self.target
        key = t.sim.pool_key(site)
        est, pool = estimate_moments_recycled(
            self.pools.get(key), cavity, t.sim, site, t.observed[:site], t.observed[site],
            self.cfg, rng, table=self.table, keep_samples=self.keep_samples, threads=self.threads,
        )
        self.pools[key] = pool
        self._record(site, est)
        return est
