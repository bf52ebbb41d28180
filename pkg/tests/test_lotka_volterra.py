"""Jump-process simulation checks against birth/death process means."""

import numpy as np
import pytest

from epabc.models import LotkaVolterra, generate_lv_dataset, lv_simulate_batch, lv_simulate_interval


class TestAbsorbingStates:
    def test_zero_rates_freeze_the_state(self):
        rng = np.random.default_rng(0)
        out = lv_simulate_interval([13, 7], [0.0, 0.0, 0.0], 5.0, rng)
        np.testing.assert_array_equal(out, [13, 7])

    def test_extinction_is_absorbing(self):
        rng = np.random.default_rng(1)
        out = lv_simulate_interval([0, 0], [0.4, 0.01, 0.3], 10.0, rng)
        np.testing.assert_array_equal(out, [0, 0])


class TestBirthDeathMeans:
    def test_pure_birth_mean(self):
        """Prey-only process from 20 with rate 0.4 has mean 20 e^{0.4} at t=1."""
        rng = np.random.default_rng(2)
        reps = 100_000
        final = lv_simulate_batch(np.tile([20, 0], (reps, 1)), [0.4, 0.0, 0.0], 1.0, rng)
        expected = 20 * np.exp(0.4)
        sample = final[:, 0].astype(float)
        mcse = sample.std() / np.sqrt(reps)
        assert abs(sample.mean() - expected) < 3 * mcse
        # exact Yule variance n0 e^{rt}(e^{rt}-1) validates the spread too
        var_expected = 20 * np.exp(0.4) * (np.exp(0.4) - 1.0)
        assert sample.var() == pytest.approx(var_expected, rel=0.05)

    def test_pure_death_mean(self):
        rng = np.random.default_rng(3)
        reps = 100_000
        final = lv_simulate_batch(np.tile([0, 30], (reps, 1)), [0.0, 0.0, 0.3], 1.0, rng)
        expected = 30 * np.exp(-0.3)
        sample = final[:, 1].astype(float)
        mcse = sample.std() / np.sqrt(reps)
        assert abs(sample.mean() - expected) < 3 * mcse

    def test_scalar_version_agrees_with_batch(self):
        rng = np.random.default_rng(4)
        reps = 20_000
        singles = np.array([lv_simulate_interval([20, 0], [0.4, 0.0, 0.0], 1.0, rng)[0]
                            for _ in range(reps)], dtype=float)
        expected = 20 * np.exp(0.4)
        assert abs(singles.mean() - expected) < 3 * singles.std() / np.sqrt(reps)


class TestInvariants:
    def test_populations_never_negative(self):
        rng = np.random.default_rng(5)
        rates = np.exp(rng.uniform(-4, 0.5, size=(20_000, 3)))
        starts = rng.integers(0, 60, size=(20_000, 2))
        out = lv_simulate_batch(starts, rates, 1.0, rng)
        assert np.all(out >= 0)

    def test_runaway_trajectories_are_parked_far_away(self):
        rng = np.random.default_rng(6)
        out = lv_simulate_batch(np.array([[50, 1]]), np.array([[400.0, 0.0, 0.0]]), 1.0, rng,
                                max_events=500)
        assert out[0, 0] >= 10 ** 9

    def test_model_conditions_on_observed_history(self):
        data = generate_lv_dataset([0.4, 0.01, 0.3], [20, 30], 5, np.random.default_rng(7))
        sim = LotkaVolterra(data, y0=[20, 30])
        thetas = np.log(np.tile([0.4, 0.01, 0.3], (256, 1)))
        rng = np.random.default_rng(8)
        # chunk 3 starts from the observed chunk 2, whatever theta is
        out = sim.sample_chunk_batch(3, data[:3], thetas, rng)
        assert out.shape == (256, 2)
        zero = sim.sample_chunk_batch(3, data[:3], np.full((4, 3), -60.0), rng)
        np.testing.assert_array_equal(zero, np.tile(data[2], (4, 1)))

    def test_dataset_generator_length(self):
        data = generate_lv_dataset([0.4, 0.01, 0.3], [20, 30], 12, np.random.default_rng(9))
        assert len(data) == 12
        assert all(chunk.shape == (2,) for chunk in data)
