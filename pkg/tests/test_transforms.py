"""Parameter-space bijections: special values and round trips."""

import numpy as np
import pytest

from epabc.errors import DomainError
from epabc.models.transforms import (
    drift_from_theta,
    drift_to_theta,
    transform_params,
)


class TestSpecialValues:
    def test_stable_alpha_one_maps_to_zero(self):
        theta = transform_params("alpha_stable", [1.0, 0.0, 1.0, 0.0])
        assert theta[0] == pytest.approx(0.0, abs=1e-12)
        assert theta[1] == pytest.approx(0.0, abs=1e-12)

    def test_sv_centre_points(self):
        theta = transform_params("sv", [0.0, 0.0, 1.0, 1.5])
        assert theta[1] == pytest.approx(0.0, abs=1e-12)  # rho = 0
        assert theta[3] == pytest.approx(0.0, abs=1e-12)  # alpha = 1.5

    def test_zero_drift_maps_to_zero(self):
        assert drift_to_theta(0.0) == pytest.approx(0.0, abs=1e-12)


class TestRoundTrips:
    def test_lv_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            native = np.exp(rng.uniform(-6, 1, 3))
            theta = transform_params("lotka_volterra", native)
            np.testing.assert_allclose(
                transform_params("lotka_volterra", theta, "to_native"), native, rtol=1e-12
            )

    def test_sv_round_trip(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            native = np.array([
                rng.normal(0, 3),
                rng.uniform(-0.99, 0.99),
                np.exp(rng.uniform(-3, 1)),
                rng.uniform(1.01, 1.99),
            ])
            theta = transform_params("sv", native)
            np.testing.assert_allclose(
                transform_params("sv", theta, "to_native"), native, atol=1e-10
            )

    def test_drift_round_trip(self):
        rng = np.random.default_rng(2)
        m = rng.uniform(-0.0999, 0.0999, 100)
        np.testing.assert_allclose(drift_from_theta(drift_to_theta(m)), m, atol=1e-12)

    def test_race_difficult_round_trip(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            native = np.exp(rng.uniform(-7, 3.5, 3))
            theta = transform_params("race_difficult", native)
            np.testing.assert_allclose(
                transform_params("race_difficult", theta, "to_native"), native, rtol=1e-12
            )


class TestDomains:
    @pytest.mark.parametrize(
        "model,bad",
        [
            ("alpha_stable", [2.0, 0.0, 1.0, 0.0]),   # alpha on the closed boundary
            ("alpha_stable", [1.5, 1.0, 1.0, 0.0]),   # beta boundary
            ("alpha_stable", [1.5, 0.0, 0.0, 0.0]),   # zero scale
            ("lotka_volterra", [0.4, -0.1, 0.3]),
            ("sv", [0.0, 1.0, 0.2, 1.5]),
            ("sv", [0.0, 0.5, 0.2, 2.0]),
        ],
    )
    def test_out_of_domain(self, model, bad):
        with pytest.raises(DomainError):
            transform_params(model, bad)

    def test_drift_bound(self):
        with pytest.raises(DomainError):
            drift_to_theta(0.1)

    def test_unknown_model(self):
        with pytest.raises(DomainError):
            transform_params("unknown", [1.0])
