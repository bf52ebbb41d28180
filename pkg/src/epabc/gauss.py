"""Gaussian exponential-family arithmetic in natural and moment parametrisations.

A site or global approximation is an unnormalised Gaussian
``exp(-0.5 theta^t Q theta + r^t theta)`` with natural parameters ``(r, Q)``.
The moment form carries ``(mu, Sigma)`` with ``Sigma = Q^{-1}`` and
``mu = Q^{-1} r``.  All determinants and inverses go through Cholesky
factorisations; covariance-like matrices get an escalating diagonal jitter
before a failure is declared, because stochastic moment estimates are only
approximately symmetric positive definite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtri

from .errors import DimensionMismatch, DomainError, InvalidAlpha, NotPositiveDefinite

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)

LOG_2PI = float(np.log(2.0 * np.pi))


def _as_vector(x) -> np.ndarray:
    v = np.array(x, dtype=np.float64, copy=True)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    return v


def _as_symmetric(m, d: int) -> np.ndarray:
    a = np.array(m, dtype=np.float64, copy=True)
    if a.shape != (d, d):
        raise DimensionMismatch(f"expected a {d}x{d} matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class NaturalGaussian:
    """Natural parameters (r, Q); Q is symmetrised on construction.

    Q need not be positive definite: individual sites may carry indefinite
    contributions.  Only conversion to moments requires Q > 0.
    """

    r: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        r = _as_vector(self.r)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "Q", _as_symmetric(self.Q, r.shape[0]))

    @property
    def d(self) -> int:
        return self.r.shape[0]

    @staticmethod
    def zero(d: int) -> "NaturalGaussian":
        return NaturalGaussian(np.zeros(d), np.zeros((d, d)))


@dataclass(frozen=True)
class MomentGaussian:
    """Moment parameters (mu, Sigma); Sigma is symmetrised on construction."""

    mu: np.ndarray
    Sigma: np.ndarray

    def __post_init__(self):
        mu = _as_vector(self.mu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Sigma", _as_symmetric(self.Sigma, mu.shape[0]))

    @property
    def d(self) -> int:
        return self.mu.shape[0]


def cholesky_spd(mat: np.ndarray, what: str = "matrix") -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``mat``, trying the jitter ladder in order.

    Returns (L, jitter_used).  Raises NotPositiveDefinite when even the
    largest jitter fails.
    """
    mat = np.asarray(mat, dtype=np.float64)
    eye = np.eye(mat.shape[0])
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(mat if jitter == 0.0 else mat + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefinite(f"{what} is not positive definite (jitter up to {JITTER_LADDER[-1]})")


def to_moments(nat: NaturalGaussian) -> MomentGaussian:
    """Invert (r, Q) -> (mu, Sigma) with Sigma = Q^{-1}, mu = Q^{-1} r."""
    L, _ = cholesky_spd(nat.Q, "precision Q")
    sigma = cho_solve((L, True), np.eye(nat.d), check_finite=False)
    mu = cho_solve((L, True), nat.r, check_finite=False)
    return MomentGaussian(mu, sigma)


def to_natural(mom: MomentGaussian) -> NaturalGaussian:
    """Invert (mu, Sigma) -> (r, Q) with Q = Sigma^{-1}, r = Q mu."""
    L, _ = cholesky_spd(mom.Sigma, "covariance Sigma")
    q = cho_solve((L, True), np.eye(mom.d), check_finite=False)
    q = 0.5 * (q + q.T)
    return NaturalGaussian(q @ mom.mu, q)


def log_partition(nat: NaturalGaussian) -> float:
    """log integral of exp(-0.5 theta^t Q theta + r^t theta) d theta.

    Equals (d/2) log(2 pi) - (1/2) log|Q| + (1/2) r^t Q^{-1} r.  The
    quadratic term uses Q^{-1}: that is the form consistent with the
    Gaussian integral (complete the square).
    """
    L, _ = cholesky_spd(nat.Q, "precision Q")
    half_logdet = float(np.sum(np.log(np.diag(L))))
    x = solve_triangular(L, nat.r, lower=True, check_finite=False)
    return 0.5 * nat.d * LOG_2PI - half_logdet + 0.5 * float(x @ x)


def combine(a: NaturalGaussian, b: NaturalGaussian, sign: int = 1) -> NaturalGaussian:
    """Componentwise a + sign*b on natural parameters.

    sign=-1 yields the cavity construction (global minus one site).  No
    definiteness is required or checked.
    """
    if a.d != b.d:
        raise DimensionMismatch(f"dimension mismatch: {a.d} vs {b.d}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return NaturalGaussian(a.r + sign * b.r, a.Q + sign * b.Q)


def damped_site(old: NaturalGaussian, full_new: NaturalGaussian, alpha: float) -> NaturalGaussian:
    """Convex blend alpha*full_new + (1-alpha)*old of site parameters.

    alpha=1 returns full_new itself (bit-exact), the undamped update.
    """
    if not (0.0 < alpha <= 1.0):
        raise InvalidAlpha(f"damping factor must lie in (0, 1], got {alpha}")
    if alpha == 1.0:
        return full_new
    if old.d != full_new.d:
        raise DimensionMismatch(f"dimension mismatch: {old.d} vs {full_new.d}")
    return NaturalGaussian(
        alpha * full_new.r + (1.0 - alpha) * old.r,
        alpha * full_new.Q + (1.0 - alpha) * old.Q,
    )


def std_normal_inverse_cdf(u):
    """N(0,1) inverse distribution function, elementwise on arrays.

    Raises DomainError unless all inputs lie strictly inside (0, 1).
    """
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("inverse normal CDF requires arguments in the open interval (0, 1)")
    out = ndtri(arr)
    return float(out) if np.isscalar(u) or arr.ndim == 0 else out


def min_covariance_eigenvalue(nat: NaturalGaussian) -> float:
    """Smallest eigenvalue of the covariance implied by natural parameters."""
    mom = to_moments(nat)
    return float(np.linalg.eigvalsh(mom.Sigma)[0])
