"""Bijections between native model parameters and unconstrained theta vectors.

EP approximates a Gaussian over theta, so every bounded or positive native
parameter is mapped to the real line: probabilities-like quantities through
the standard normal CDF, scales through logs.  All maps are exact bijections
on the stated open domains and raise DomainError outside them.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

from ..errors import DomainError

DRIFT_BOUND = 0.1  # race-model drifts live in (-0.1, 0.1)


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise DomainError(message)


def _vec(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


def stable_to_theta(native) -> np.ndarray:
    """(alpha, beta, gamma, delta) -> (ndtri(alpha/2), ndtri((beta+1)/2), log gamma, delta)."""
    alpha, beta, gamma, delta = _vec(native)
    _check(0.0 < alpha < 2.0, f"stable tail index must lie in (0, 2), got {alpha}")
    _check(-1.0 < beta < 1.0, f"stable skewness must lie in (-1, 1), got {beta}")
    _check(gamma > 0.0, f"stable scale must be positive, got {gamma}")
    return np.array([ndtri(alpha / 2.0), ndtri((beta + 1.0) / 2.0), np.log(gamma), delta])


def stable_from_theta(theta) -> np.ndarray:
    t = _vec(theta)
    return np.array([2.0 * ndtr(t[0]), 2.0 * ndtr(t[1]) - 1.0, np.exp(t[2]), t[3]])


def lv_to_theta(native) -> np.ndarray:
    rates = _vec(native)
    _check(bool(np.all(rates > 0.0)), f"reaction rates must be positive, got {rates}")
    return np.log(rates)


def lv_from_theta(theta) -> np.ndarray:
    return np.exp(_vec(theta))


def drift_to_theta(m):
    """Drift in (-0.1, 0.1) -> ndtri(5 m + 0.5), elementwise."""
    m = _vec(m)
    _check(bool(np.all(np.abs(m) < DRIFT_BOUND)), f"drifts must lie in (-{DRIFT_BOUND}, {DRIFT_BOUND})")
    return ndtri(5.0 * m + 0.5)


def drift_from_theta(t):
    return (ndtr(_vec(t)) - 0.5) / 5.0


def race_to_theta(native) -> np.ndarray:
    """(m_1..m_2K, c1, c2, s) -> (drift transforms..., lambda, delta, s).

    Thresholds are encoded as c1 = exp(lambda), c2 = exp(lambda + delta).
    """
    v = _vec(native)
    if v.shape[0] < 5 or (v.shape[0] - 3) % 2:
        raise DomainError(f"race parameter vector must have even drift count plus (c1, c2, s); got length {v.shape[0]}")
    drifts, (c1, c2, s) = v[:-3], v[-3:]
    _check(c1 > 0.0 and c2 > 0.0, "thresholds must be positive")
    lam = np.log(c1)
    return np.concatenate([drift_to_theta(drifts), [lam, np.log(c2) - lam, s]])


def race_from_theta(theta) -> np.ndarray:
    t = _vec(theta)
    drifts = drift_from_theta(t[:-3])
    lam, delta, s = t[-3:]
    return np.concatenate([drifts, [np.exp(lam), np.exp(lam + delta), s]])


def race_difficult_to_theta(native) -> np.ndarray:
    """(m1, m2, c1) with positive drifts -> componentwise logs."""
    v = _vec(native)
    _check(bool(np.all(v > 0.0)), f"difficult-variant parameters must be positive, got {v}")
    return np.log(v)


def race_difficult_from_theta(theta) -> np.ndarray:
    return np.exp(_vec(theta))


def sv_to_theta(native) -> np.ndarray:
    """(mu, rho, sigma, alpha) -> (mu, ndtri((rho+1)/2), log sigma, ndtri(alpha-1))."""
    mu, rho, sigma, alpha = _vec(native)
    _check(-1.0 < rho < 1.0, f"persistence must lie in (-1, 1), got {rho}")
    _check(sigma > 0.0, f"innovation scale must be positive, got {sigma}")
    _check(1.0 < alpha < 2.0, f"tail index must lie in (1, 2), got {alpha}")
    return np.array([mu, ndtri((rho + 1.0) / 2.0), np.log(sigma), ndtri(alpha - 1.0)])


def sv_from_theta(theta) -> np.ndarray:
    t = _vec(theta)
    return np.array([t[0], 2.0 * ndtr(t[1]) - 1.0, np.exp(t[2]), 1.0 + ndtr(t[3])])


TRANSFORMS = {
    "alpha_stable": (stable_to_theta, stable_from_theta),
    "lotka_volterra": (lv_to_theta, lv_from_theta),
    "race": (race_to_theta, race_from_theta),
    "race_difficult": (race_difficult_to_theta, race_difficult_from_theta),
    "sv": (sv_to_theta, sv_from_theta),
}


def transform_params(model: str, values, direction: str = "to_theta") -> np.ndarray:
    """Dispatch to the model's transform pair; direction is to_theta|to_native."""
    try:
        fwd, inv = TRANSFORMS[model]
    except KeyError:
        raise DomainError(f"no parameter transform registered for model {model!r}") from None
    if direction == "to_theta":
        return fwd(values)
    if direction == "to_native":
        return inv(values)
    raise ValueError(f"direction must be to_theta or to_native, got {direction!r}")
