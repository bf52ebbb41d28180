"""Stochastic Lotka-Volterra (prey/predator) simulation via the Gillespie algorithm.

Reactions and hazards, for state (y1, y2) and rates (r1, r2, r3):

    prey birth      y1 -> 2*y1          hazard r1*y1
    predation       y1 + y2 -> 2*y2     hazard r2*y1*y2
    predator death  y2 -> 0             hazard r3*y2

Observations are the state at integer times, so one chunk is simulated by
running the jump process for a unit interval from the previously observed
state.  The batch simulator advances many trajectories in lockstep with an
active-set loop; trajectories whose event count explodes (wildly large rates
drawn from a wide cavity) are frozen at a far-away sentinel state so they
can never satisfy the acceptance ball.
"""

from __future__ import annotations

import numpy as np

from .base import Simulator

SENTINEL = 10 ** 9  # replaces runaway trajectories; farther than any epsilon ball
POP_CAP = 10 ** 7


def lv_simulate_interval(state, rates, duration: float, rng: np.random.Generator):
    """Exact single-trajectory simulation over one interval.

    Draw exponential waiting times with the total hazard, pick a reaction
    with probability proportional to its hazard, apply it, and stop once the
    accumulated time would exceed the duration.  Zero total hazard is
    absorbing.
    """
    y1, y2 = int(state[0]), int(state[1])
    r1, r2, r3 = float(rates[0]), float(rates[1]), float(rates[2])
    t = 0.0
    while True:
        h1 = r1 * y1
        h2 = r2 * y1 * y2
        h3 = r3 * y2
        h0 = h1 + h2 + h3
        if h0 <= 0.0:
            break
        t += rng.exponential(1.0 / h0)
        if t > duration:
            break
        u = rng.random() * h0
        if u < h1:
            y1 += 1
        elif u < h1 + h2:
            y1 -= 1
            y2 += 1
        else:
            y2 -= 1
    return np.array([y1, y2], dtype=np.int64)


def lv_simulate_batch(
    states: np.ndarray,
    rates: np.ndarray,
    duration: float,
    rng: np.random.Generator,
    max_events: int = 20_000,
) -> np.ndarray:
    """Advance M trajectories over one interval, vectorised over the active set."""
    y = np.array(np.atleast_2d(states), dtype=np.int64)
    if y.shape[0] == 1:
        y = np.repeat(y, np.atleast_2d(rates).shape[0], axis=0)
    r = np.atleast_2d(np.asarray(rates, dtype=np.float64))
    if r.shape[0] == 1:
        r = np.repeat(r, y.shape[0], axis=0)
    m = y.shape[0]
    t = np.zeros(m)
    events = np.zeros(m, dtype=np.int64)
    alive = np.ones(m, dtype=bool)
    while True:
        act = np.flatnonzero(alive)
        if act.size == 0:
            break
        y1 = y[act, 0].astype(np.float64)
        y2 = y[act, 1].astype(np.float64)
        h1 = r[act, 0] * y1
        h2 = r[act, 1] * y1 * y2
        h3 = r[act, 2] * y2
        h0 = h1 + h2 + h3
        absorbed = h0 <= 0.0
        if np.any(absorbed):
            alive[act[absorbed]] = False
        live = ~absorbed
        if not np.any(live):
            continue
        sub = act[live]
        h0l = h0[live]
        t[sub] += rng.standard_exponential(sub.size) / h0l
        done = t[sub] > duration
        if np.any(done):
            alive[sub[done]] = False
        step = sub[~done]
        if step.size == 0:
            continue
        u = rng.random(step.size) * h0l[~done]
        c1 = h1[live][~done]
        c2 = c1 + h2[live][~done]
        birth = u < c1
        predation = (~birth) & (u < c2)
        death = ~(birth | predation)
        y[step[birth], 0] += 1
        y[step[predation], 0] -= 1
        y[step[predation], 1] += 1
        y[step[death], 1] -= 1
        events[step] += 1
        runaway = step[(events[step] >= max_events) | (y[step, 0] > POP_CAP) | (y[step, 1] > POP_CAP)]
        if runaway.size:
            y[runaway] = SENTINEL
            alive[runaway] = False
    return y


class LotkaVolterra(Simulator):
    """Markov chunks: population pair at integer times, conditioned on the
    previously observed pair."""

    d = 3

    def __init__(self, observed, y0=(20, 30), interval: float = 1.0, max_events: int = 20_000):
        self.observed = [np.asarray(c, dtype=np.float64) for c in observed]
        self.n = len(self.observed)
        self.y0 = np.asarray(y0, dtype=np.int64)
        self.interval = float(interval)
        self.max_events = int(max_events)

    def chunk_dim(self, i: int) -> int:
        return 2

    def _start(self, history) -> np.ndarray:
        return np.asarray(history[-1], dtype=np.int64) if len(history) else self.y0

    def sample_chunk_batch(self, i, history, thetas, rng):
        rates = np.exp(np.atleast_2d(np.asarray(thetas, dtype=np.float64)))
        start = self._start(history)
        return lv_simulate_batch(start, rates, self.interval, rng, self.max_events).astype(np.float64)

    def sample_chunk(self, i, history, theta, rng):
        rates = np.exp(np.asarray(theta, dtype=np.float64))
        return lv_simulate_interval(self._start(history), rates, self.interval, rng).astype(np.float64)


def generate_lv_dataset(rates, y0, n: int, rng) -> list:
    """Exact sequential dataset of n population pairs at integer times."""
    state = np.asarray(y0, dtype=np.int64)
    out = []
    for _ in range(n):
        state = lv_simulate_interval(state, rates, 1.0, rng)
        out.append(state.astype(np.float64))
    return out
