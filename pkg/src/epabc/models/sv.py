"""Stochastic volatility with heavy-tailed returns: latent AR(1) log-variance,
symmetric alpha-stable observations with scale exp(x/2).

    x_1 ~ N(mu, sigma^2 / (1 - rho^2))        (stationary start)
    x_{t+1} = mu + rho (x_t - mu) + sigma u_t
    y_t | x_t ~ Stable(alpha, beta=0, gamma=exp(x_t/2), delta=0)

The observation density is intractable but blocks of consecutive
observations are cheap to simulate marginally, which is what the
composite-likelihood adapter needs.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from ..errors import NonStationary
from .stable import stable_sample


def _check_stationary(rho: np.ndarray) -> None:
    if np.any(np.abs(rho) >= 1.0):
        raise NonStationary("latent AR(1) requires |rho| < 1 for a stationary start")


def sv_latent_block(mu, rho, sigma, length: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, length) latent paths started from the stationary law."""
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (count,))
    rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), (count,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (count,))
    _check_stationary(rho)
    x = np.empty((count, length))
    x[:, 0] = mu + sigma / np.sqrt(1.0 - rho * rho) * rng.standard_normal(count)
    for t in range(1, length):
        x[:, t] = mu + rho * (x[:, t - 1] - mu) + sigma * rng.standard_normal(count)
    return x


def sv_sample_block(native, length: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, length) observation blocks, marginally distributed as the model.

    Latents are drawn first (stationary start, then the recursion), and the
    observations afterwards, independently given their latent.
    """
    mu, rho, sigma, alpha = np.asarray(native, dtype=np.float64)
    x = sv_latent_block(mu, rho, sigma, length, count, rng)
    return stable_sample(alpha, 0.0, np.exp(0.5 * x), 0.0, rng, size=(count, length))


def sv_sample_block_thetas(thetas: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Block per theta row; thetas are unconstrained 4-vectors."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    mu = thetas[:, 0]
    rho = 2.0 * ndtr(thetas[:, 1]) - 1.0
    sigma = np.exp(thetas[:, 2])
    alpha = 1.0 + ndtr(thetas[:, 3])
    x = sv_latent_block(mu, rho, sigma, length, thetas.shape[0], rng)
    return stable_sample(alpha[:, None], 0.0, np.exp(0.5 * x), 0.0, rng, size=x.shape)


def generate_sv_dataset(native, n: int, rng: np.random.Generator) -> list:
    """One observed series of length n as scalar chunks."""
    mu, rho, sigma, alpha = np.asarray(native, dtype=np.float64)
    _check_stationary(np.asarray(rho))
    x = mu + sigma / np.sqrt(1.0 - rho * rho) * rng.standard_normal()
    out = []
    for _ in range(n):
        out.append(np.array([stable_sample(alpha, 0.0, np.exp(0.5 * x), 0.0, rng)]))
        x = mu + rho * (x - mu) + sigma * rng.standard_normal()
    return out
