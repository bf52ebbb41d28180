"""Reference methods used to validate the EP approximation.

* A Gaussian random-walk ABC sampler with a whole-dataset summary constraint
  (one fresh dataset per proposal; the accept decision is a pure function of
  the prior ratio and the constraint indicator).
* A 1-D quadrature posterior for models whose likelihood is computable.
* Exact conjugate formulas and moment oracles for linear-Gaussian models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NonFinite, StuckChain
from .gauss import LOG_2PI, MomentGaussian, NaturalGaussian, cholesky_spd
from .models.base import chunk_distance
from .moments import MomentEstimate


@dataclass
class MCMCABCConfig:
    """Random-walk ABC settings: dataset summary s(y), tolerance, proposal scales."""

    summary: Callable
    epsilon: float
    proposal_scales: np.ndarray
    iterations: int
    init: np.ndarray
    thin: int = 1

    def __post_init__(self):
        self.proposal_scales = np.asarray(self.proposal_scales, dtype=np.float64)
        self.init = np.asarray(self.init, dtype=np.float64)
        if np.any(self.proposal_scales <= 0.0):
            raise ValueError("proposal scales must be positive")


@dataclass
class MCMCABCResult:
    chain: np.ndarray          # (kept, d) thinned states
    acceptance_rate: float
    accepted: int
    iterations: int
    path: Optional[list] = None  # (iteration, theta, accepted flag) rows when recorded


def accept_move(log_prior_ratio: float, constraint_ok: bool, log_u: float) -> bool:
    """Marjoram-style decision: prior Metropolis ratio times the constraint
    indicator; nothing else enters."""
    return bool(constraint_ok) and (log_prior_ratio >= log_u)


def _log_prior_unnorm(prior: NaturalGaussian, theta: np.ndarray) -> float:
    return float(-0.5 * theta @ prior.Q @ theta + prior.r @ theta)


STUCK_WINDOW = 10_000


def mcmc_abc(
    model,
    cfg: MCMCABCConfig,
    prior: NaturalGaussian,
    rng: np.random.Generator,
    record_all: bool = False,
) -> MCMCABCResult:
    """Markov chain targeting the summary-constrained ABC posterior.

    Each proposal simulates one fresh dataset from the model; the move is
    accepted iff the dataset's summary lies within epsilon of the observed
    summary (Euclidean) and the symmetric-proposal prior ratio accepts.
    Raises StuckChain when nothing is accepted over the initial window.
    """
    theta = cfg.init.copy()
    s_obs = np.asarray(cfg.summary(model.observed), dtype=np.float64)
    log_p = _log_prior_unnorm(prior, theta)
    kept = []
    path = [] if record_all else None
    accepted = 0
    for it in range(cfg.iterations):
        prop = theta + cfg.proposal_scales * rng.standard_normal(theta.shape[0])
        dataset = model.simulate_dataset(prop, rng)
        s_sim = np.asarray(cfg.summary(dataset), dtype=np.float64)
        ok = float(np.linalg.norm(s_sim - s_obs)) <= cfg.epsilon
        log_u = float(np.log(rng.random()))
        log_p_prop = _log_prior_unnorm(prior, prop)
        moved = accept_move(log_p_prop - log_p, ok, log_u)
        if moved:
            theta = prop
            log_p = log_p_prop
            accepted += 1
        if it % cfg.thin == 0:
            kept.append(theta.copy())
        if path is not None:
            path.append((it, theta.copy(), moved))
        if it + 1 == STUCK_WINDOW and accepted == 0:
            raise StuckChain(f"no accepted move in the first {it + 1} iterations")
    return MCMCABCResult(np.asarray(kept), accepted / cfg.iterations, accepted, cfg.iterations, path)


@dataclass
class QuadratureResult:
    grid: np.ndarray
    density: np.ndarray
    mean: float
    variance: float


def quadrature_posterior_1d(log_target, lo: float, hi: float, points: int = 4096) -> QuadratureResult:
    """Trapezoid-normalised density, mean and variance of a 1-D log target."""
    grid = np.linspace(lo, hi, points)
    try:
        logs = np.asarray(log_target(grid), dtype=np.float64)
        if logs.shape != grid.shape:
            raise TypeError
    except (TypeError, ValueError):
        logs = np.array([float(log_target(x)) for x in grid])
    if np.any(np.isnan(logs)) or np.any(logs == np.inf):
        raise NonFinite("log target produced NaN or +inf on the grid")
    w = np.exp(logs - logs.max())
    z = np.trapezoid(w, grid)
    density = w / z
    mean = float(np.trapezoid(grid * density, grid))
    variance = float(np.trapezoid((grid - mean) ** 2 * density, grid))
    return QuadratureResult(grid, density, mean, variance)


def conjugate_linear_gaussian(cavity: MomentGaussian, A, R, y) -> tuple[MomentGaussian, float]:
    """Exact posterior moments and log normaliser of cavity x N(y; A theta, R)."""
    a = np.atleast_2d(np.asarray(A, dtype=np.float64))
    r_mat = np.atleast_2d(np.asarray(R, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    pred_cov = a @ cavity.Sigma @ a.T + r_mat
    l, _ = cholesky_spd(pred_cov, "predictive covariance")
    resid = y - a @ cavity.mu
    gain = cho_solve((l, True), a @ cavity.Sigma, check_finite=False).T
    mean = cavity.mu + gain @ resid
    cov = cavity.Sigma - gain @ a @ cavity.Sigma
    white = solve_triangular(l, resid, lower=True, check_finite=False)
    log_z = -0.5 * (y.shape[0] * LOG_2PI + white @ white) - float(np.sum(np.log(np.diag(l))))
    return MomentGaussian(mean, cov), float(log_z)


def gaussian_iid_posterior(prior_mean: float, prior_var: float, ys, obs_var: float = 1.0):
    """Closed-form posterior (mean, var) for y_i ~ N(theta, obs_var), theta ~ N(m0, v0)."""
    ys = np.asarray(ys, dtype=np.float64).ravel()
    prec = 1.0 / prior_var + ys.shape[0] / obs_var
    mean = (prior_mean / prior_var + ys.sum() / obs_var) / prec
    return mean, 1.0 / prec


def gaussian_iid_log_evidence(prior_mean: float, prior_var: float, ys, obs_var: float = 1.0) -> float:
    """Exact log marginal likelihood via the one-step-ahead predictive product."""
    m, v = float(prior_mean), float(prior_var)
    total = 0.0
    for y in np.asarray(ys, dtype=np.float64).ravel():
        pv = v + obs_var
        total += -0.5 * (LOG_2PI + np.log(pv) + (y - m) ** 2 / pv)
        k = v / pv
        m = m + k * (y - m)
        v = v * (1.0 - k)
    return total


class ExactGaussianOracle:
    """Analytic hybrid moments for the conjugate IID Gaussian model; drop-in
    replacement for the simulation-based oracles in tests."""

    def __init__(self, observed, obs_var: float = 1.0):
        self.observed = [np.atleast_1d(np.asarray(y, dtype=np.float64)) for y in observed]
        self.obs_var = float(obs_var)
        self.sims_total = 0

    def __call__(self, cavity: MomentGaussian, site: int, rng=None) -> MomentEstimate:
        a = np.ones((1, cavity.d))
        post, log_z = conjugate_linear_gaussian(cavity, a, [[self.obs_var]], self.observed[site])
        return MomentEstimate(
            z_hat=float(np.exp(log_z)),
            mu_hat=post.mu,
            sigma_hat=post.Sigma,
            m_total=0,
            m_acc=0.0,
            log_z=log_z,
        )


class CavityOracle:
    """Vacuous oracle: the hybrid equals the cavity and the normaliser is one."""

    def __call__(self, cavity: MomentGaussian, site: int, rng=None) -> MomentEstimate:
        return MomentEstimate(1.0, cavity.mu.copy(), cavity.Sigma.copy(), 0, 0.0, log_z=0.0)


def folded_gaussian_loglik(ys) -> Callable[[np.ndarray], np.ndarray]:
    """log p(y | theta) for the folded-mean toy model, vectorised over theta."""
    ys = np.asarray(ys, dtype=np.float64).ravel()

    def log_lik(theta):
        theta = np.asarray(theta, dtype=np.float64)
        resid = ys[None, ...] - np.abs(np.atleast_1d(theta))[..., None]
        return np.squeeze(-0.5 * np.sum(resid * resid, axis=-1) - 0.5 * ys.shape[0] * LOG_2PI)

    return log_lik
