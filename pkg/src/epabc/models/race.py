"""Two-accumulator race model of choice and reaction time.

Each trial runs two discretised Wiener processes with drift until one hits
its (per-trial noisy) boundary; the winner determines the choice, the hit
time the decision time.  The measured reaction time adds a uniform
non-decision component on [a, b].  With small probability the subject
lapses: the decision time is uniform on [0, lapse_ceiling] and the choice is
uniform.  If nothing has crossed by the ceiling, accumulation stops there
and the highest accumulator wins.

The acceptance weight marginalises the uniform non-decision noise
analytically: given a simulated decision time, the probability over r_nd
that |log(r_d + r_nd) - log(r*)| <= epsilon holds is an interval overlap,
which replaces the 0/1 indicator by a smooth weight in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Simulator
from .transforms import drift_from_theta


@dataclass(frozen=True)
class RaceConstants:
    """Fixed quantities of the trial process (all times in ms)."""

    tau: float = 5.0            # diffusion time scale
    a: float = 100.0            # non-decision time lower bound
    b: float = 200.0            # non-decision time upper bound
    lapse: float = 0.05         # probability of an inattentive trial
    ceiling: float = 1000.0     # accumulation stops here
    lapse_ceiling: float = 800.0
    dt: float = 1.0             # Euler step


def race_decision_batch(
    drifts: np.ndarray,
    thresholds: np.ndarray,
    s: np.ndarray,
    rng: np.random.Generator,
    consts: RaceConstants = RaceConstants(),
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate M trials; returns (choice in {1, 2}, decision time in ms).

    The accumulators follow tau de = m dt + dW, i.e. per step they gain
    m*(dt/tau) plus N(0, dt/tau^2) noise; boundaries are thresholds plus
    independent N(0, e^s) draws.  Finished trials are compressed out of the
    active set each step.
    """
    drifts = np.atleast_2d(np.asarray(drifts, dtype=np.float64))
    m = drifts.shape[0]
    thresholds = np.broadcast_to(np.atleast_2d(np.asarray(thresholds, dtype=np.float64)), (m, 2))
    s = np.broadcast_to(np.asarray(s, dtype=np.float64).ravel(), (m,))

    choice = np.zeros(m, dtype=np.int64)
    decision_ms = np.zeros(m, dtype=np.float64)

    lapse_mask = rng.random(m) < consts.lapse
    n_lapse = int(lapse_mask.sum())
    if n_lapse:
        decision_ms[lapse_mask] = rng.random(n_lapse) * consts.lapse_ceiling
        choice[lapse_mask] = rng.integers(1, 3, n_lapse)

    idx = np.flatnonzero(~lapse_mask)
    if idx.size == 0:
        return choice, decision_ms
    bounds = thresholds[idx] + rng.standard_normal((idx.size, 2)) * np.exp(0.5 * s[idx])[:, None]
    evidence = np.zeros((idx.size, 2))
    step_drift = drifts[idx] * (consts.dt / consts.tau)
    step_sd = np.sqrt(consts.dt) / consts.tau

    # boundaries drawn at or below zero cross immediately
    over = evidence - bounds
    crossed = over.max(axis=1) >= 0.0
    if np.any(crossed):
        hit = idx[crossed]
        choice[hit] = np.argmax(over[crossed], axis=1) + 1
        decision_ms[hit] = 0.0
        keep = ~crossed
        idx, bounds, evidence, step_drift = idx[keep], bounds[keep], evidence[keep], step_drift[keep]

    t = 0.0
    while idx.size and t < consts.ceiling:
        t += consts.dt
        evidence += step_drift + step_sd * rng.standard_normal(evidence.shape)
        over = evidence - bounds
        crossed = over.max(axis=1) >= 0.0
        if np.any(crossed):
            hit = idx[crossed]
            choice[hit] = np.argmax(over[crossed], axis=1) + 1
            decision_ms[hit] = t
            keep = ~crossed
            idx, bounds, evidence, step_drift = idx[keep], bounds[keep], evidence[keep], step_drift[keep]
    if idx.size:
        choice[idx] = np.argmax(evidence, axis=1) + 1
        decision_ms[idx] = consts.ceiling
    return choice, decision_ms


def race_trial(drifts, thresholds, s: float, rng: np.random.Generator,
               consts: RaceConstants = RaceConstants()) -> tuple[int, float]:
    """One observable trial: (choice, reaction time including non-decision noise)."""
    choice, decision_ms = race_decision_batch(
        np.asarray(drifts, dtype=np.float64)[None, :], np.asarray(thresholds, dtype=np.float64)[None, :],
        np.array([s]), rng, consts,
    )
    return int(choice[0]), float(decision_ms[0] + consts.a + rng.random() * (consts.b - consts.a))


def race_accept_weight(decision_ms, choice, observed, epsilon: float,
                       a: float = 100.0, b: float = 200.0) -> np.ndarray:
    """P over r_nd ~ U[a, b] that |log(r_d + r_nd) - log r*| <= epsilon, given
    the choice matches; exactly the overlap of [a, b] with
    [r* e^{-eps} - r_d, r* e^{+eps} - r_d], normalised by b - a."""
    decision_ms = np.asarray(decision_ms, dtype=np.float64)
    choice = np.asarray(choice)
    obs_choice, obs_rt = int(observed[0]), float(observed[1])
    lo = obs_rt * np.exp(-epsilon) - decision_ms
    hi = obs_rt * np.exp(epsilon) - decision_ms
    overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, b - a)
    return overlap / (b - a) * (choice == obs_choice)


class RaceBlocks(Simulator):
    """Per-condition drifts with shared thresholds: theta is
    (drift transforms for each condition..., lambda, delta, s) and each trial
    depends only on its condition's 5-coordinate sub-vector."""

    def __init__(self, condition: np.ndarray, observed, n_conditions: int | None = None,
                 consts: RaceConstants = RaceConstants()):
        self.condition = np.asarray(condition, dtype=np.int64)
        self.observed = [np.asarray(c, dtype=np.float64) for c in observed]
        self.n = len(self.observed)
        self.k = int(n_conditions if n_conditions is not None else self.condition.max() + 1)
        self.d = 2 * self.k + 3
        self.consts = consts

    def chunk_dim(self, i: int) -> int:
        return 2

    def active_block(self, i: int):
        c = int(self.condition[i])
        base = 2 * self.k
        return np.array([2 * c, 2 * c + 1, base, base + 1, base + 2])

    def pool_key(self, i: int):
        return int(self.condition[i])

    def _native(self, i, thetas):
        c = int(self.condition[i])
        drifts = drift_from_theta(thetas[:, 2 * c:2 * c + 2])
        lam = thetas[:, 2 * self.k]
        delta = thetas[:, 2 * self.k + 1]
        s = thetas[:, 2 * self.k + 2]
        thresholds = np.column_stack([np.exp(lam), np.exp(lam + delta)])
        return drifts, thresholds, s

    def sample_chunk_batch(self, i, history, thetas, rng):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        drifts, thresholds, s = self._native(i, thetas)
        choice, decision_ms = race_decision_batch(drifts, thresholds, s, rng, self.consts)
        return np.column_stack([choice.astype(np.float64), decision_ms])

    def accept_weight_batch(self, i, chunks, observed, epsilon, norm):
        chunks = np.atleast_2d(np.asarray(chunks, dtype=np.float64))
        return race_accept_weight(chunks[:, 1], chunks[:, 0].astype(np.int64), observed,
                                  epsilon, self.consts.a, self.consts.b)

    def observe(self, i, chunk, rng):
        nd = self.consts.a + rng.random() * (self.consts.b - self.consts.a)
        return np.array([chunk[0], chunk[1] + nd])

    def simulate_dataset(self, theta, rng):
        theta = np.asarray(theta, dtype=np.float64)[None, :]
        out = [None] * self.n
        for c in range(self.k):
            sites = np.flatnonzero(self.condition == c)
            if sites.size == 0:
                continue
            drifts, thresholds, s = self._native(int(sites[0]), theta)
            choice, decision_ms = race_decision_batch(
                np.repeat(drifts, sites.size, axis=0), np.repeat(thresholds, sites.size, axis=0),
                np.repeat(s, sites.size), rng, self.consts,
            )
            nd = self.consts.a + rng.random(sites.size) * (self.consts.b - self.consts.a)
            for j, site in enumerate(sites):
                out[site] = np.array([float(choice[j]), decision_ms[j] + nd[j]])
        return out


class RaceDifficult(Simulator):
    """Single-condition variant with theta = (log m1, log m2, log c1) and the
    remaining parameters fixed; drifts are positive and unbounded here."""

    d = 3
    iid = True

    def __init__(self, observed, c2: float = 10.0, s: float = 0.0,
                 consts: RaceConstants = RaceConstants()):
        self.observed = [np.asarray(c, dtype=np.float64) for c in observed]
        self.n = len(self.observed)
        self.c2 = float(c2)
        self.s = float(s)
        self.consts = consts

    def chunk_dim(self, i: int) -> int:
        return 2

    def sample_chunk_batch(self, i, history, thetas, rng):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        with np.errstate(over="ignore"):
            drifts = np.exp(thetas[:, :2])
            c1 = np.exp(thetas[:, 2])
        thresholds = np.column_stack([c1, np.full(thetas.shape[0], self.c2)])
        choice, decision_ms = race_decision_batch(
            drifts, thresholds, np.full(thetas.shape[0], self.s), rng, self.consts,
        )
        return np.column_stack([choice.astype(np.float64), decision_ms])

    def accept_weight_batch(self, i, chunks, observed, epsilon, norm):
        chunks = np.atleast_2d(np.asarray(chunks, dtype=np.float64))
        return race_accept_weight(chunks[:, 1], chunks[:, 0].astype(np.int64), observed,
                                  epsilon, self.consts.a, self.consts.b)

    def observe(self, i, chunk, rng):
        nd = self.consts.a + rng.random() * (self.consts.b - self.consts.a)
        return np.array([chunk[0], chunk[1] + nd])

    def simulate_dataset(self, theta, rng):
        thetas = np.tile(np.asarray(theta, dtype=np.float64), (self.n, 1))
        chunks = self.sample_chunk_batch(0, [], thetas, rng)
        nd = self.consts.a + rng.random(self.n) * (self.consts.b - self.consts.a)
        return [np.array([chunks[i, 0], chunks[i, 1] + nd[i]]) for i in range(self.n)]


def rt_dataset_summary(dataset, probs=None, scale: float = 1.0 / 200.0) -> np.ndarray:
    """Whole-dataset statistic for the random-walk ABC baseline: reaction-time
    quantiles at probs (default 8 points linearly spaced on [0.01, 0.99]),
    rescaled, plus an indicator that the first category was ever chosen."""
    if probs is None:
        probs = np.linspace(0.01, 0.99, 8)
    arr = np.asarray(dataset, dtype=np.float64).reshape(len(dataset), -1)
    rts = arr[:, 1]
    flag = 1.0 if np.any(arr[:, 0].astype(np.int64) == 1) else 0.0
    return np.concatenate([np.quantile(rts, probs) * scale, [flag]])
