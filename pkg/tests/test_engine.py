"""EP loop: site updates, fixed points, conjugate exactness, failure policy."""

import numpy as np
import pytest

from epabc.baselines import (
    CavityOracle,
    ExactGaussianOracle,
    gaussian_iid_log_evidence,
    gaussian_iid_posterior,
)
from epabc.engine import EPConfig, EPState, UpdateOutcome, log_evidence, run_ep, update_site
from epabc.errors import AbortedOnFailure, TooManySkips, ZeroAcceptance
from epabc.gauss import NaturalGaussian, to_moments
from epabc.models import GaussianIID, generate_gaussian_dataset
from epabc.moments import MomentEstimate, SiteTarget
from epabc.rng import child_rng


def unit_prior(d=1, var=1.0):
    return NaturalGaussian(np.zeros(d), np.eye(d) / var)


def make_target(n=5, theta=1.0, prior_var=100.0, seed=0):
    data = generate_gaussian_dataset(theta, n, child_rng(seed, 0))
    return SiteTarget(unit_prior(1, prior_var), GaussianIID(data), data)


class TestUpdateSite:
    def test_vacuous_moments_leave_state_unchanged(self):
        state = EPState.initial(unit_prior(), 1)
        cav = to_moments(state.cavity(0))
        est = MomentEstimate(1.0, cav.mu, cav.Sigma, 0, 0.0)
        out = update_site(state, 0, est, 1.0)
        assert out.accepted
        np.testing.assert_allclose(state.sites[0].nat.Q, [[0.0]], atol=1e-12)
        np.testing.assert_allclose(state.sites[0].nat.r, [0.0], atol=1e-12)
        np.testing.assert_allclose(state.global_nat.Q, [[1.0]], atol=1e-12)
        assert state.sites[0].log_c == pytest.approx(0.0, abs=1e-12)

    def test_conjugate_moment_match(self):
        """Hybrid N(0, 1/2) against cavity N(0,1) must yield site (r=0, Q=1)."""
        state = EPState.initial(unit_prior(), 1)
        est = MomentEstimate(1.0, np.array([0.0]), np.array([[0.5]]), 0, 0.0)
        update_site(state, 0, est, 1.0)
        np.testing.assert_allclose(state.sites[0].nat.Q, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(state.sites[0].nat.r, [0.0], atol=1e-12)

    def test_shifted_moment_match(self):
        state = EPState.initial(unit_prior(), 1)
        est = MomentEstimate(1.0, np.array([1.0]), np.array([[0.5]]), 0, 0.0)
        update_site(state, 0, est, 1.0)
        np.testing.assert_allclose(state.sites[0].nat.Q, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(state.sites[0].nat.r, [2.0], atol=1e-12)

    def test_indefinite_hybrid_is_skipped_bit_identical(self):
        state = EPState.initial(unit_prior(), 1)
        r_before, q_before = state.global_nat.r.copy(), state.global_nat.Q.copy()
        est = MomentEstimate(1.0, np.array([0.0]), np.array([[-0.5]]), 0, 0.0)
        out = update_site(state, 0, est, 1.0)
        assert not out.accepted and out.reason == "hybrid_not_pd"
        assert np.array_equal(state.global_nat.r, r_before)
        assert np.array_equal(state.global_nat.Q, q_before)

    def test_invalid_normaliser_raises(self):
        state = EPState.initial(unit_prior(), 1)
        est = MomentEstimate(0.0, np.array([0.0]), np.array([[0.5]]), 10, 0.0)
        with pytest.raises(ZeroAcceptance):
            update_site(state, 0, est, 1.0)


class TestRunEp:
    def test_vacuous_oracle_is_fixed_point(self):
        target = make_target(n=6)
        state = run_ep(target, CavityOracle(), EPConfig(passes=3), seed=1)
        for site in state.sites:
            np.testing.assert_allclose(site.nat.Q, 0.0, atol=1e-10)
            np.testing.assert_allclose(site.nat.r, 0.0, atol=1e-10)
            assert site.log_c == pytest.approx(0.0, abs=1e-10)
        assert log_evidence(state) == pytest.approx(0.0, abs=1e-9)

    def test_exact_oracle_reaches_conjugate_posterior_in_one_pass(self):
        target = make_target(n=50, theta=1.0, prior_var=100.0, seed=3)
        oracle = ExactGaussianOracle(target.observed)
        state = run_ep(target, oracle, EPConfig(passes=1), seed=2)
        ys = np.concatenate(target.observed)
        mom = to_moments(state.global_nat)
        assert mom.mu[0] == pytest.approx(ys.sum() / (50 + 1e-2), abs=1e-10)

    def test_second_pass_is_a_no_op(self):
        target = make_target(n=20, seed=4)
        oracle = ExactGaussianOracle(target.observed)
        one = run_ep(target, oracle, EPConfig(passes=1), seed=2)
        four = run_ep(target, oracle, EPConfig(passes=4), seed=2)
        for a, b in zip(one.sites, four.sites):
            assert abs(a.nat.Q[0, 0] - b.nat.Q[0, 0]) < 1e-9
            assert abs(a.nat.r[0] - b.nat.r[0]) < 1e-9

    def test_global_equals_prior_plus_sites(self):
        target = make_target(n=15, seed=5)
        state = run_ep(target, ExactGaussianOracle(target.observed), EPConfig(passes=2), seed=2)
        exact = state.resummed_global()
        assert np.max(np.abs(exact.Q - state.global_nat.Q)) < 1e-10
        assert np.max(np.abs(exact.r - state.global_nat.r)) < 1e-10

    def test_trace_covers_every_visit(self):
        target = make_target(n=7, seed=6)
        state = run_ep(target, ExactGaussianOracle(target.observed), EPConfig(passes=3), seed=2)
        assert len(state.trace) == 3 * 7
        assert all(not row.skipped for row in state.trace)

    def test_damping_switches_to_full_updates(self):
        target = make_target(n=10, seed=7)
        cfg = EPConfig(passes=3, alpha=0.2, min_pass_for_full_update=3)
        assert cfg.effective_alpha(1) == 0.2
        assert cfg.effective_alpha(3) == 1.0
        state = run_ep(target, ExactGaussianOracle(target.observed), cfg, seed=2)
        ys = np.concatenate(target.observed)
        mom = to_moments(state.global_nat)
        # the final full-update pass lands exactly on the conjugate posterior
        assert mom.mu[0] == pytest.approx(ys.sum() / (10 + 1e-2), abs=1e-9)


class FailingOracle:
    """Raises on every call, or returns indefinite moments, per mode."""

    def __init__(self, mode):
        self.mode = mode

    def __call__(self, cavity, site, rng):
        if self.mode == "zero":
            raise ZeroAcceptance("nothing accepted")
        return MomentEstimate(1.0, cavity.mu, -cavity.Sigma, 0, 0.0)


class TestFailurePolicy:
    def test_all_sites_skipped_raises(self):
        target = make_target(n=4)
        with pytest.raises(TooManySkips):
            run_ep(target, FailingOracle("zero"), EPConfig(passes=1), seed=2)

    def test_abort_policy(self):
        target = make_target(n=4)
        with pytest.raises(AbortedOnFailure):
            run_ep(target, FailingOracle("zero"), EPConfig(passes=1, on_failure="abort"), seed=2)

    def test_partial_failures_are_counted_and_traced(self):
        target = make_target(n=6, seed=9)
        exact = ExactGaussianOracle(target.observed)

        def flaky(cavity, site, rng):
            if site % 2 == 0:
                raise ZeroAcceptance("even sites fail")
            return exact(cavity, site, rng)

        state = run_ep(target, flaky, EPConfig(passes=2), seed=2)
        assert state.skips == 2 * 3
        skipped_rows = [row for row in state.trace if row.skipped]
        assert len(skipped_rows) == 6
        assert all(row.reason == "zero_acceptance" for row in skipped_rows)


class TestEvidence:
    def test_single_site_exact(self):
        """One N(theta,1) observation y*=0 under prior N(0,1): evidence N(0;0,2)."""
        data = [np.array([0.0])]
        target = SiteTarget(unit_prior(1, 1.0), GaussianIID(data), data)
        state = run_ep(target, ExactGaussianOracle(data), EPConfig(passes=1), seed=2)
        expected = -0.5 * (np.log(2 * np.pi * 2.0))
        assert log_evidence(state) == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(-1.26551, abs=1e-5)

    def test_volume_correction_is_a_shift(self):
        data = [np.array([0.0])]
        target = SiteTarget(unit_prior(1, 1.0), GaussianIID(data), data)
        state = run_ep(target, ExactGaussianOracle(data), EPConfig(passes=1), seed=2)
        correction = np.log(2 * 0.01)
        assert log_evidence(state, 0.0) - log_evidence(state, correction) == pytest.approx(
            correction, abs=1e-12
        )

    def test_full_dataset_matches_sequential_marginal(self):
        target = make_target(n=30, seed=10)
        state = run_ep(target, ExactGaussianOracle(target.observed), EPConfig(passes=2), seed=2)
        exact = gaussian_iid_log_evidence(0.0, 100.0, np.concatenate(target.observed))
        assert log_evidence(state) == pytest.approx(exact, abs=1e-9)


def test_closed_form_helpers_agree():
    rng = np.random.default_rng(11)
    ys = rng.normal(1.0, 1.0, 40)
    mean, var = gaussian_iid_posterior(0.0, 100.0, ys)
    assert mean == pytest.approx(ys.sum() / (40 + 1e-2))
    assert var == pytest.approx(1.0 / (40 + 1e-2))
