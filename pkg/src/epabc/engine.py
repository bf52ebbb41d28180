"""Expectation-propagation outer loop over Gaussian sites.

The target factorises as a Gaussian prior times n likelihood contributions.
Each site holds natural parameters (r_i, Q_i), initialised to zero, plus a
log-normaliser increment log C_i.  A sweep visits every site in order:
remove the site from the global approximation (cavity), obtain hybrid
moments from a moment oracle, moment-match, and write back a (possibly
damped) site update.  The sum of the log C_i plus the difference of global
and prior log-partitions approximates the log evidence.

Stochastic moment estimates can produce indefinite updates; the failure
policy either skips the offending site (keeping a count) or aborts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AbortedOnFailure, NotPositiveDefinite, TooManySkips, ZeroAcceptance
from .gauss import (
    MomentGaussian,
    NaturalGaussian,
    cholesky_spd,
    combine,
    damped_site,
    log_partition,
    to_moments,
    to_natural,
)
from .moments import MomentEstimate
from .rng import child_rng

RESUM_TOLERANCE = 1e-8


@dataclass
class Site:
    """One approximating factor: natural parameters plus evidence increment."""

    nat: NaturalGaussian
    log_c: float = 0.0


@dataclass
class TraceRow:
    pass_index: int
    site_index: int
    mean: np.ndarray
    min_eigenvalue: float
    skipped: bool
    reason: str = "ok"


@dataclass
class EPConfig:
    passes: int = 4
    alpha: float = 1.0
    min_pass_for_full_update: Optional[int] = None
    on_failure: str = "skip_site"

    def __post_init__(self):
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.on_failure not in ("skip_site", "abort"):
            raise ValueError(f"unknown failure policy {self.on_failure!r}")

    def effective_alpha(self, pass_index: int) -> float:
        if self.min_pass_for_full_update is not None and pass_index >= self.min_pass_for_full_update:
            return 1.0
        return self.alpha


@dataclass
class UpdateOutcome:
    accepted: bool
    reason: str = "ok"


@dataclass
class EPState:
    """Prior, sites, and the incrementally maintained global approximation."""

    prior: NaturalGaussian
    sites: list[Site]
    global_nat: NaturalGaussian
    trace: list[TraceRow] = field(default_factory=list)
    skips: int = 0
    max_resum_drift: float = 0.0

    @staticmethod
    def initial(prior: NaturalGaussian, n: int) -> "EPState":
        cholesky_spd(prior.Q, "prior precision")
        sites = [Site(NaturalGaussian.zero(prior.d)) for _ in range(n)]
        return EPState(prior=prior, sites=sites, global_nat=prior)

    @property
    def n(self) -> int:
        return len(self.sites)

    def cavity(self, i: int) -> NaturalGaussian:
        return combine(self.global_nat, self.sites[i].nat, -1)

    def resummed_global(self) -> NaturalGaussian:
        total = self.prior
        for site in self.sites:
            total = combine(total, site.nat, 1)
        return total

    def audit_resum(self) -> float:
        """Replace the running global by the exact prior+sites sum; return the drift."""
        exact = self.resummed_global()
        drift = max(
            float(np.max(np.abs(exact.r - self.global_nat.r), initial=0.0)),
            float(np.max(np.abs(exact.Q - self.global_nat.Q), initial=0.0)),
        )
        self.max_resum_drift = max(self.max_resum_drift, drift)
        self.global_nat = exact
        return drift

    def moments(self) -> MomentGaussian:
        return to_moments(self.global_nat)


def update_site(state: EPState, i: int, moments: MomentEstimate, alpha: float) -> UpdateOutcome:
    """Moment-match site i against the hybrid estimate, with damping alpha.

    The candidate site is (Sigma_h^{-1} - Q_cavity, Sigma_h^{-1} mu_h -
    r_cavity); the stored site becomes the alpha-blend of candidate and old
    values, the global approximation is updated incrementally, and log C_i is
    recomputed from the hybrid normaliser and the log-partition difference of
    the post-update global and the cavity.  Failures (hybrid covariance or
    new global not positive definite) leave the state untouched.
    """
    if moments.log_z is None and not (np.isfinite(moments.z_hat) and moments.z_hat > 0.0):
        raise ZeroAcceptance(f"site {i}: invalid hybrid normaliser {moments.z_hat}")
    if not (np.all(np.isfinite(moments.mu_hat)) and np.all(np.isfinite(moments.sigma_hat))):
        raise ZeroAcceptance(f"site {i}: non-finite hybrid moments")

    cavity = state.cavity(i)
    try:
        hybrid_nat = to_natural(MomentGaussian(moments.mu_hat, moments.sigma_hat))
    except NotPositiveDefinite:
        return UpdateOutcome(False, "hybrid_not_pd")

    candidate = combine(hybrid_nat, cavity, -1)
    new_site = damped_site(state.sites[i].nat, candidate, alpha)
    new_global = combine(cavity, new_site, 1)
    try:
        cholesky_spd(new_global.Q, "updated global precision")
    except NotPositiveDefinite:
        return UpdateOutcome(False, "global_not_pd")

    log_z = moments.log_z if moments.log_z is not None else float(np.log(moments.z_hat))
    state.sites[i] = Site(new_site, log_z - log_partition(new_global) + log_partition(cavity))
    state.global_nat = new_global
    return UpdateOutcome(True)


def run_ep(
    target,
    oracle: Callable[[MomentGaussian, int, np.random.Generator], MomentEstimate],
    config: EPConfig,
    seed: int,
    visit_hook: Optional[Callable] = None,
) -> EPState:
    """Run config.passes sequential sweeps over the target's sites.

    The oracle maps (cavity moments, site index, rng) to a MomentEstimate;
    per-visit rng streams are derived from the seed, so results are
    reproducible.  Every visit is traced (global mean, smallest covariance
    eigenvalue, skip flag).  Raises TooManySkips if an entire pass is
    skipped, and AbortedOnFailure under the abort policy.
    """
    state = EPState.initial(target.prior, target.n)
    begin_pass = getattr(oracle, "begin_pass", None)
    for pass_index in range(1, config.passes + 1):
        if begin_pass is not None:
            begin_pass(pass_index, config.passes)
        alpha = config.effective_alpha(pass_index)
        pass_skips = 0
        for i in range(state.n):
            rng = child_rng(seed, pass_index, i)
            estimate = None
            try:
                cavity_mom = to_moments(state.cavity(i))
            except NotPositiveDefinite:
                outcome = UpdateOutcome(False, "cavity_not_pd")
            else:
                try:
                    estimate = oracle(cavity_mom, i, rng)
                    outcome = update_site(state, i, estimate, alpha)
                except ZeroAcceptance:
                    outcome = UpdateOutcome(False, "zero_acceptance")
            if not outcome.accepted:
                if config.on_failure == "abort":
                    raise AbortedOnFailure(f"site {i}, pass {pass_index}: {outcome.reason}")
                state.skips += 1
                pass_skips += 1
            mom = to_moments(state.global_nat)
            state.trace.append(
                TraceRow(
                    pass_index,
                    i,
                    mom.mu.copy(),
                    float(np.linalg.eigvalsh(mom.Sigma)[0]),
                    not outcome.accepted,
                    outcome.reason,
                )
            )
            if visit_hook is not None:
                visit_hook(pass_index, i, estimate, outcome, state)
        if pass_skips == state.n:
            raise TooManySkips(f"all {state.n} sites skipped in pass {pass_index}")
        drift = state.audit_resum()
        if drift > RESUM_TOLERANCE:
            raise AbortedOnFailure(f"global-parameter drift {drift:.3e} exceeds {RESUM_TOLERANCE}")
    return state


def log_evidence(state: EPState, log_volume_correction: float = 0.0) -> float:
    """Sum of site log-normalisers plus log-partition difference, less the
    acceptance-ball volume correction (zero unless summary-less kernels were
    used)."""
    total = sum(site.log_c for site in state.sites)
    return total + log_partition(state.global_nat) - log_partition(state.prior) - log_volume_correction
