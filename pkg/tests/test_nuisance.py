import math

import numpy as np
import pytest
from scipy.stats import norm

from adesens import (
    BasisSpec,
    ConfigError,
    DataError,
    Dataset,
    DgpSpec,
    LocationScaleScoreModel,
    NuisanceFit,
    NumericalError,
    PinballBasisRegressor,
    RidgeBasisRegressor,
    RunConfig,
    draw_dataset,
    fit_all,
    fit_conditional_mean,
    fit_conditional_median,
    fit_score_location_scale,
    resmooth_derivative,
    resmooth_mean,
)
from adesens.dgp import latent_index


class TestConditionalMean:
    def test_exact_linear_recovery(self, rng):
        a = rng.normal(size=200)
        x = rng.normal(size=(200, 1))
        ds = Dataset(2.0 * a, a, x)
        mu = fit_conditional_mean(ds, BasisSpec(degree_a=1, degree_x=1, interaction_order=0, ridge=0.0))
        grid = np.linspace(-2, 2, 50)
        assert np.max(np.abs(mu(grid, np.zeros((50, 1))) - 2.0 * grid)) < 1e-8

    def test_constant_outcome(self, rng):
        a = rng.normal(size=100)
        x = rng.normal(size=(100, 2))
        ds = Dataset(np.full(100, 3.25), a, x)
        mu = fit_conditional_mean(ds, BasisSpec())
        assert np.max(np.abs(mu(a, x) - 3.25)) < 1e-10

    def test_singular_without_ridge(self, rng):
        a = rng.normal(size=100)
        x1 = rng.normal(size=100)
        ds = Dataset(rng.normal(size=100), a, np.column_stack([x1, x1]))
        with pytest.raises(NumericalError, match="ridge"):
            fit_conditional_mean(ds, BasisSpec(ridge=0.0))

    def test_too_small_training_fold(self, rng):
        ds = Dataset(rng.normal(size=5), rng.normal(size=5), rng.normal(size=(5, 3)))
        with pytest.raises(ConfigError, match="exceed"):
            fit_conditional_mean(ds, BasisSpec())

    def test_binary_beats_constant_on_probit_dgp(self):
        spec = DgpSpec(dose_family="gaussian", outcome_type="binary", delta=0.0, zeta=0.0)
        ds, ctx = draw_dataset(spec, 5000, seed=5)
        p_true = norm.cdf(latent_index(spec, ctx.coeffs, ds.a, ds.x, np.zeros(ds.n)))
        mu = fit_conditional_mean(ds, BasisSpec())
        mse_fit = float(np.mean((mu(ds.a, ds.x) - p_true) ** 2))
        mse_const = float(np.mean((np.mean(ds.y) - p_true) ** 2))
        assert mse_fit < mse_const

    def test_binary_predictions_clipped(self):
        spec = DgpSpec(dose_family="gaussian", outcome_type="binary", delta=0.0, zeta=0.0)
        ds, _ = draw_dataset(spec, 2000, seed=6)
        mu = fit_conditional_mean(ds, BasisSpec())
        extreme_a = np.array([-1e3, -10.0, 0.0, 10.0, 1e3])
        preds = mu(extreme_a, np.zeros((5, 5)))
        assert np.all(preds >= 1e-6) and np.all(preds <= 1.0 - 1e-6)


class TestResmoothDerivative:
    def test_linear_fixed_point(self):
        mu = lambda a, x: 2.0 * np.asarray(a, dtype=float)
        for bw in (0.05, 0.5, 2.0):
            deriv = resmooth_derivative(mu, bw)
            vals = deriv(np.linspace(-3, 3, 25), None)
            assert np.max(np.abs(vals - 2.0)) < 1e-6

    def test_quadratic_small_bandwidth(self):
        deriv = resmooth_derivative(lambda a, x: np.asarray(a) ** 2, 0.01)
        assert deriv(np.array([1.0]), None)[0] == pytest.approx(2.0, abs=1e-3)

    def test_constant_gives_zero(self):
        deriv = resmooth_derivative(lambda a, x: np.full_like(np.asarray(a, dtype=float), 7.0), 0.3)
        assert np.max(np.abs(deriv(np.linspace(-5, 5, 11), None))) < 1e-10

    def test_matches_finite_difference_of_smoothed_mean(self, rng):
        # Derivative consistency on a fitted predictor at 100 random points.
        ds, _ = draw_dataset(DgpSpec(zeta=0.0, delta=0.0), 2000, seed=2)
        mu = fit_conditional_mean(ds, BasisSpec())
        bw = 0.2 * float(np.std(ds.a))
        deriv = resmooth_derivative(mu, bw)
        smooth = resmooth_mean(mu, bw)
        a = rng.uniform(-2, 2, 100)
        x = rng.uniform(0, 1, (100, 5))
        h = 1e-4 * bw
        fd = (smooth(a + h, x) - smooth(a - h, x)) / (2.0 * h)
        assert np.max(np.abs(deriv(a, x) - fd)) < 1e-6

    def test_rejects_bad_bandwidth(self):
        with pytest.raises(ConfigError):
            resmooth_derivative(lambda a, x: a, 0.0)


class TestScoreLocationScale:
    def test_standard_normal_score(self, rng):
        a = rng.normal(size=5000)
        x = rng.uniform(size=(5000, 1))
        ds = Dataset(np.zeros(5000), a, x)
        score = fit_score_location_scale(ds, BasisSpec(), variance_floor=1e-3)
        val = score(np.array([1.0]), np.array([[0.5]]))[0]
        assert val == pytest.approx(-1.0, abs=0.1)

    def test_gaussian_dose_score_rms(self):
        spec = DgpSpec(dose_family="gaussian", outcome_type="continuous", delta=0.0, zeta=0.0)
        ds, ctx = draw_dataset(spec, 5000, seed=11)
        score = fit_score_location_scale(ds, BasisSpec(), variance_floor=1e-3)
        truth = -(ds.a - ds.x @ ctx.coeffs.theta_arr)
        rms = math.sqrt(float(np.mean((score(ds.a, ds.x) - truth) ** 2)))
        assert rms < 0.1

    def test_truncation_clamps(self, rng):
        a = 0.03 * rng.normal(size=2000)
        ds = Dataset(np.zeros(2000), a, rng.uniform(size=(2000, 1)))
        score = fit_score_location_scale(ds, BasisSpec(), variance_floor=1e-3, truncation=50.0)
        vals = score(np.array([1.0, -1.0]), np.zeros((2, 1)))
        assert vals[0] == -50.0 and vals[1] == 50.0

    def test_degenerate_exposure(self, rng):
        ds = Dataset(rng.normal(size=50), np.full(50, 1.5), rng.normal(size=(50, 1)))
        with pytest.raises(DataError, match="degenerate exposure"):
            fit_score_location_scale(ds, BasisSpec(), variance_floor=1e-3)

    def test_score_integrates_to_zero(self, rng):
        # Under the implied location-scale normal density the fitted score
        # has conditional mean zero: quadrature check at 10 random x.
        spec = DgpSpec(dose_family="gaussian", outcome_type="continuous", delta=0.0, zeta=0.0)
        ds, _ = draw_dataset(spec, 4000, seed=13)
        model = LocationScaleScoreModel(variance_floor=1e-3)
        model.fit(ds.x, ds.a)
        for _ in range(10):
            x = rng.uniform(0, 1, (1, 5))
            m = model.location(x)[0]
            sd = math.sqrt(model.scale2(x)[0])
            grid = np.linspace(m - 8 * sd, m + 8 * sd, 2001)
            dens = norm.pdf(grid, loc=m, scale=sd)
            svals = model.at(grid, np.repeat(x, grid.size, axis=0))
            integral = np.trapezoid(svals * dens, grid)
            assert abs(integral) < 1e-6


class TestConditionalMedian:
    def test_symmetric_noise(self):
        spec = DgpSpec(dose_family="gaussian", outcome_type="continuous", delta=0.0, zeta=0.0)
        ds, ctx = draw_dataset(spec, 5000, seed=17)
        median = fit_conditional_median(ds, BasisSpec())
        truth = latent_index(spec, ctx.coeffs, ds.a, ds.x, np.zeros(ds.n))
        rms = math.sqrt(float(np.mean((median(ds.a, ds.x) - truth) ** 2)))
        assert rms < 0.1

    def test_constant_outcome_exact(self, rng):
        a = rng.normal(size=400)
        ds = Dataset(np.full(400, -1.75), a, rng.uniform(size=(400, 2)))
        median = fit_conditional_median(ds, BasisSpec())
        assert np.max(np.abs(median(a, ds.x) + 1.75)) < 1e-6

    def test_exponential_noise_shifts_by_log2(self, rng):
        a = rng.normal(size=5000)
        x = rng.uniform(size=(5000, 1))
        y = a + rng.exponential(1.0, size=5000)
        ds = Dataset(y, a, x)
        median = fit_conditional_median(ds, BasisSpec())
        rms = math.sqrt(float(np.mean((median(a, x) - (a + math.log(2.0))) ** 2)))
        assert rms < 0.1

    def test_binary_unsupported(self):
        spec = DgpSpec(dose_family="gaussian", outcome_type="binary", delta=0.0, zeta=0.0)
        ds, _ = draw_dataset(spec, 500, seed=19)
        with pytest.raises(DataError, match="unsupported"):
            fit_conditional_median(ds, BasisSpec())

    def test_coordinate_perturbation_cannot_improve(self, rng):
        # Pinball stationarity: moving any single coefficient by +/-0.01 must
        # not reduce the training loss beyond the recorded stationarity gap.
        a = rng.normal(size=800)
        x = rng.uniform(size=(800, 2))
        y = 0.5 * a + x[:, 0] + rng.standard_t(df=3, size=800)
        model = PinballBasisRegressor()
        Z = np.column_stack([a, x])
        model.fit(Z, y)
        assert model.stationarity_gap_ < 1e-8
        phi = model.basis_.transform(a, x)
        base_loss = float(np.mean(np.abs(y - phi @ model.coef_)))
        for j in range(phi.shape[1]):
            for sign in (1.0, -1.0):
                beta = model.coef_.copy()
                beta[j] += sign * 0.01
                loss = float(np.mean(np.abs(y - phi @ beta)))
                assert loss >= base_loss - model.stationarity_gap_ - 1e-10

    def test_deterministic(self, rng):
        a = rng.normal(size=500)
        x = rng.uniform(size=(500, 1))
        y = a + rng.normal(size=500)
        m1 = PinballBasisRegressor().fit(np.column_stack([a, x]), y)
        m2 = PinballBasisRegressor().fit(np.column_stack([a, x]), y)
        assert np.array_equal(m1.coef_, m2.coef_)


class TestFitAll:
    def test_continuous_bundle(self):
        ds, _ = draw_dataset(DgpSpec(zeta=0.0, delta=0.0), 1000, seed=23)
        fit = fit_all(ds, RunConfig())
        a, x = ds.a[:5], ds.x[:5]
        for pred in (fit.predict_mu, fit.predict_mu_prime, fit.predict_score, fit.predict_median):
            assert pred(a, x).shape == (5,)

    def test_binary_median_unsupported(self):
        spec = DgpSpec(dose_family="gaussian", outcome_type="binary", delta=0.0, zeta=0.0)
        ds, _ = draw_dataset(spec, 1000, seed=29)
        fit = fit_all(ds, RunConfig(outcome_type="binary"))
        assert fit.median is None
        with pytest.raises(DataError, match="binary"):
            fit.predict_median(ds.a[:3], ds.x[:3])

    def test_outcome_type_mismatch(self):
        ds, _ = draw_dataset(DgpSpec(zeta=0.0, delta=0.0), 200, seed=31)
        with pytest.raises(ConfigError):
            fit_all(ds, RunConfig(outcome_type="binary"))

    def test_oracle_injection_interface(self):
        # Callers can bypass fitting entirely by supplying closed forms.
        fit = NuisanceFit(
            mu=lambda a, x: 2.0 * np.asarray(a, dtype=float),
            mu_prime=lambda a, x: np.full_like(np.asarray(a, dtype=float), 2.0),
            score=lambda a, x: -np.asarray(a, dtype=float),
            median=lambda a, x: 2.0 * np.asarray(a, dtype=float),
            outcome_type="continuous",
        )
        a = np.array([0.5, -1.0])
        x = np.zeros((2, 0))
        assert np.array_equal(fit.predict_mu(a, x), 2.0 * a)
        assert np.array_equal(fit.predict_mu_prime(a, x), [2.0, 2.0])


class TestSklearnCompat:
    def test_get_set_params_and_clone(self):
        from sklearn.base import clone

        model = RidgeBasisRegressor(degree_a=3, ridge=0.5)
        params = model.get_params()
        assert params["degree_a"] == 3 and params["ridge"] == 0.5
        cloned = clone(model)
        assert cloned.get_params() == params

    def test_fit_predict_roundtrip(self, rng):
        Z = np.column_stack([rng.normal(size=300), rng.uniform(size=(300, 2))])
        y = Z[:, 0] + Z[:, 1]
        model = RidgeBasisRegressor(ridge=1e-8).fit(Z, y)
        assert np.max(np.abs(model.predict(Z) - y)) < 1e-4
