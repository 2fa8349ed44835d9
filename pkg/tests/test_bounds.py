import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adesens import (
    CorrectionTerm,
    DataError,
    NuisanceFit,
    WeightFn,
    correction_binary_exact,
    correction_continuous,
    lse_h,
    lse_h_prime,
    plugin_bounds_continuous,
    unit_weight,
    weighted_base_and_correction,
)

LN2 = math.log(2.0)


class TestLseH:
    def test_symmetric_point(self):
        assert lse_h(0.5, 50.0) == pytest.approx(0.5 - LN2 / 50.0, abs=1e-15)

    def test_at_zero(self):
        # -(1/50) log(1 + e^-50)
        assert lse_h(0.0, 50.0) == pytest.approx(-3.857e-24, rel=1e-3)

    @pytest.mark.parametrize("t", [1.0, 10.0, 50.0])
    def test_sandwich_on_grid(self, t):
        p = np.linspace(0.0, 1.0, 1001)
        h = lse_h(p, t)
        exact = np.minimum(p, 1.0 - p)
        assert np.all(h <= exact + 1e-15)
        assert np.all(h >= exact - LN2 / t - 1e-15)

    def test_domain(self):
        with pytest.raises(DataError):
            lse_h(-0.01, 50.0)
        with pytest.raises(DataError):
            lse_h(0.5, 0.0)

    def test_overflow_safe_extreme_t(self):
        assert np.isfinite(lse_h(1.0, 5000.0))
        assert np.isfinite(lse_h(0.0, 5000.0))

    @given(st.floats(0.0, 1.0), st.floats(0.01, 200.0))
    @settings(max_examples=200, deadline=None)
    def test_sandwich_property(self, p, t):
        h = lse_h(p, t)
        exact = min(p, 1.0 - p)
        assert exact - LN2 / t - 1e-12 <= h <= exact + 1e-12


class TestLseHPrime:
    @pytest.mark.parametrize("t", [1.0, 10.0, 50.0])
    def test_zero_at_half(self, t):
        assert lse_h_prime(0.5, t) == 0.0

    def test_saturates(self):
        assert lse_h_prime(0.0, 50.0) == pytest.approx(1.0, abs=1e-12)
        assert lse_h_prime(1.0, 50.0) == pytest.approx(-1.0, abs=1e-12)

    @pytest.mark.parametrize("t", [1.0, 10.0, 50.0])
    def test_matches_finite_difference(self, t):
        p = np.linspace(0.01, 0.99, 99)
        step = 1e-6
        fd = (lse_h(p + step, t) - lse_h(p - step, t)) / (2.0 * step)
        assert np.max(np.abs(lse_h_prime(p, t) - fd)) < 1e-6


class TestPluginBounds:
    def test_gamma_zero_collapses(self):
        assert plugin_bounds_continuous(1.0, 0.5, 0.0) == (1.0, 1.0)

    def test_published_crossing_backsolve(self):
        # Point estimate 0.108 with correction 0.108/0.323 crosses zero at
        # gamma = 0.323.
        base, gamma = 0.108, 0.323
        lo, hi = plugin_bounds_continuous(base, base / gamma, gamma)
        assert lo == pytest.approx(0.0, abs=1e-3)
        assert hi == pytest.approx(2 * base, abs=1e-3)

    def test_symmetry(self):
        assert plugin_bounds_continuous(0.0, 1.0, 2.0) == (-2.0, 2.0)

    def test_domain_errors(self):
        with pytest.raises(DataError):
            plugin_bounds_continuous(0.0, 1.0, -0.5)
        with pytest.raises(DataError):
            plugin_bounds_continuous(0.0, -1.0, 0.5)

    @given(st.floats(-5, 5), st.floats(0, 5), st.floats(0, 3), st.floats(0, 3))
    @settings(max_examples=200, deadline=None)
    def test_affine_in_gamma(self, base, corr, g1, g2):
        _, hi1 = plugin_bounds_continuous(base, corr, g1)
        _, hi2 = plugin_bounds_continuous(base, corr, g2)
        _, him = plugin_bounds_continuous(base, corr, (g1 + g2) / 2.0)
        assert hi1 + hi2 == pytest.approx(2.0 * him, abs=1e-9)

    @given(st.floats(-5, 5), st.one_of(st.just(0.0), st.floats(1e-6, 5)),
           st.one_of(st.just(0.0), st.floats(1e-6, 3)))
    @settings(max_examples=200, deadline=None)
    def test_order(self, base, corr, gamma):
        lo, hi = plugin_bounds_continuous(base, corr, gamma)
        assert hi >= lo
        assert (hi == lo) == (gamma * corr == 0.0)


class TestCorrections:
    @pytest.mark.parametrize("y,m,expected", [(3.0, 1.0, 3.0), (-2.0, 0.0, 2.0), (1.0, 1.0, 0.0)])
    def test_continuous_examples(self, y, m, expected):
        assert correction_continuous(y, m) == expected

    @given(st.floats(-10, 10), st.floats(-10, 10))
    @settings(max_examples=200, deadline=None)
    def test_continuous_identity(self, y, m):
        assert correction_continuous(y, m) == y * np.sign(y - m)

    @pytest.mark.parametrize("p,expected", [(0.3, 0.3), (0.5, 0.5), (1.0, 0.0)])
    def test_binary_examples(self, p, expected):
        assert correction_binary_exact(p) == expected

    @given(st.floats(0, 1), st.floats(0.5, 100))
    @settings(max_examples=200, deadline=None)
    def test_lse_never_exceeds_exact(self, p, t):
        gap = correction_binary_exact(p) - lse_h(p, t)
        assert -1e-12 <= gap <= LN2 / t + 1e-12


class TestCorrectionTerm:
    def test_continuous_floor(self):
        with pytest.raises(DataError):
            CorrectionTerm(-0.01, "continuous_median")

    def test_binary_floor_allows_small_dip(self):
        CorrectionTerm(-LN2 / 50.0 + 1e-15, "binary_lse", t=50.0)
        with pytest.raises(DataError):
            CorrectionTerm(-LN2 / 50.0 - 1e-6, "binary_lse", t=50.0)


def _toy_fit(outcome_type="continuous"):
    return NuisanceFit(
        mu=lambda a, x: 0.3 * np.ones_like(np.asarray(a, dtype=float)),
        mu_prime=lambda a, x: np.ones_like(np.asarray(a, dtype=float)),
        score=lambda a, x: -np.asarray(a, dtype=float),
        median=lambda a, x: np.zeros_like(np.asarray(a, dtype=float)),
        outcome_type=outcome_type,
    )


class TestWeightedContributions:
    def setup_method(self):
        self.y = np.array([1.0, -2.0, 0.5])
        self.a = np.array([0.4, -1.0, 2.0])
        self.x = np.zeros((3, 1))

    def test_unit_weight_reduces_to_unweighted(self):
        fit = _toy_fit()
        base, corr = weighted_base_and_correction(self.y, self.a, self.x, fit, unit_weight())
        s = fit.predict_score(self.a, self.x)
        assert np.array_equal(base, -s * self.y)
        assert np.array_equal(corr, correction_continuous(self.y, 0.0))

    def test_constant_weight_scales_linearly(self):
        fit = _toy_fit()
        two = WeightFn(w=lambda a, x: 2.0 * np.ones_like(a), w_prime=lambda a, x: np.zeros_like(a))
        base1, corr1 = weighted_base_and_correction(self.y, self.a, self.x, fit, unit_weight())
        base2, corr2 = weighted_base_and_correction(self.y, self.a, self.x, fit, two)
        assert np.allclose(base2, 2.0 * base1)
        assert np.allclose(corr2, 2.0 * corr1)

    def test_negative_weight_rejected(self):
        bad = WeightFn(w=lambda a, x: -np.ones_like(a), w_prime=lambda a, x: np.zeros_like(a))
        with pytest.raises(DataError, match="negative"):
            weighted_base_and_correction(self.y, self.a, self.x, _toy_fit(), bad)

    def test_binary_uses_lse(self):
        fit = _toy_fit("binary")
        _, corr = weighted_base_and_correction(self.y, self.a, self.x, fit, unit_weight(), t=50.0)
        assert np.allclose(corr, lse_h(0.3, 50.0))
