"""Nuisance estimation: conditional mean, its exposure derivative, the
conditional score of the exposure, and the conditional median.

The default learners are ridge-penalized regressions on a polynomial tensor
basis of (a, x). They are deliberately simple, deterministic, and
sklearn-compatible (fit/predict + get_params); anything exposing the same
predictor callables can be injected in their place through NuisanceFit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.special import expit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .data import Dataset, RunConfig
from .errors import ConfigError, DataError, NumericalError
from .validation import as_matrix, as_vector

# A predictor maps (a, x) arrays of shapes (n,) and (n, d) to values (n,).
Predictor = Callable[[np.ndarray, np.ndarray], np.ndarray]

MU_CLIP = 1e-6


@dataclass(frozen=True)
class BasisSpec:
    """Shape of the polynomial tensor basis and its ridge penalty."""

    degree_a: int = 2
    degree_x: int = 2
    interaction_order: int = 2
    ridge: float = 1e-3

    def __post_init__(self):
        if self.degree_a < 0 or self.degree_x < 0 or self.interaction_order < 0:
            raise ConfigError("basis degrees must be >= 0")
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0")


def _basis_exponents(d: int, spec: BasisSpec, include_a: bool) -> list[tuple[int, int, int]]:
    """Exponent triples (i, j, k) for terms a^i * x_j^k; j = -1 means no x factor."""
    terms = [(0, -1, 0)]  # intercept
    if include_a:
        terms += [(i, -1, 0) for i in range(1, spec.degree_a + 1)]
    for j in range(d):
        terms += [(0, j, k) for k in range(1, spec.degree_x + 1)]
    if include_a:
        for i in range(1, spec.degree_a + 1):
            for j in range(d):
                for k in range(1, spec.degree_x + 1):
                    if i + k <= spec.interaction_order:
                        terms.append((i, j, k))
    return terms


class _TensorBasis:
    """Raw polynomial features with train-set standardization (intercept kept raw)."""

    def __init__(self, spec: BasisSpec, include_a: bool = True):
        self.spec = spec
        self.include_a = include_a

    def _raw(self, a: np.ndarray, x: np.ndarray) -> np.ndarray:
        n = a.shape[0]
        cols = np.empty((n, len(self.terms_)))
        for c, (i, j, k) in enumerate(self.terms_):
            col = np.ones(n)
            if i:
                col = col * a**i
            if j >= 0:
                col = col * x[:, j] ** k
            cols[:, c] = col
        return cols

    def fit(self, a: np.ndarray, x: np.ndarray) -> "_TensorBasis":
        self.terms_ = _basis_exponents(x.shape[1], self.spec, self.include_a)
        raw = self._raw(a, x)
        self.center_ = raw.mean(axis=0)
        self.center_[0] = 0.0
        sd = raw.std(axis=0)
        sd[sd == 0.0] = 1.0
        sd[0] = 1.0
        self.scale_ = sd
        return self

    def transform(self, a: np.ndarray, x: np.ndarray) -> np.ndarray:
        return (self._raw(a, x) - self.center_) / self.scale_

    @property
    def n_features(self) -> int:
        return len(self.terms_)


def _ridge_solve(phi: np.ndarray, target: np.ndarray, ridge: float) -> np.ndarray:
    """Solve the (intercept-unpenalized) ridge normal equations by Cholesky."""
    p = phi.shape[1]
    gram = phi.T @ phi
    gram[np.diag_indices(p)] += np.r_[0.0, np.full(p - 1, ridge)]
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise NumericalError(
            "singular normal equations in basis regression; set ridge > 0 "
            "or reduce the basis"
        ) from None
    return scipy.linalg.cho_solve((chol, True), phi.T @ target)


def _split_design(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Z = as_matrix("Z", Z, min_cols=1)
    return Z[:, 0], Z[:, 1:]


def _check_size(n: int, p: int) -> None:
    if n <= p:
        raise ConfigError(f"training size n={n} must exceed the {p}-feature basis")


class RidgeBasisRegressor(RegressorMixin, BaseEstimator):
    """Least squares on the tensor basis with a ridge penalty.

    Design convention: Z[:, 0] is the exposure, Z[:, 1:] the covariates.
    """

    def __init__(self, degree_a=2, degree_x=2, interaction_order=2, ridge=1e-3):
        self.degree_a = degree_a
        self.degree_x = degree_x
        self.interaction_order = interaction_order
        self.ridge = ridge

    def _spec(self) -> BasisSpec:
        return BasisSpec(self.degree_a, self.degree_x, self.interaction_order, self.ridge)

    def fit(self, Z, y):
        a, x = _split_design(Z)
        y = as_vector("y", y, expect_len=a.shape[0])
        self.basis_ = _TensorBasis(self._spec()).fit(a, x)
        _check_size(a.shape[0], self.basis_.n_features)
        phi = self.basis_.transform(a, x)
        self.coef_ = _ridge_solve(phi, y, self.ridge)
        return self

    def predict(self, Z):
        check_is_fitted(self, "coef_")
        a, x = _split_design(Z)
        return self.basis_.transform(a, x) @ self.coef_

    def at(self, a, x) -> np.ndarray:
        check_is_fitted(self, "coef_")
        a = np.asarray(a, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.basis_.transform(a, x) @ self.coef_


class LogisticBasisRegressor(RegressorMixin, BaseEstimator):
    """Ridge-penalized logistic regression on the tensor basis.

    predict() returns P(Y=1 | a, x) clipped to [1e-6, 1 - 1e-6].
    """

    max_newton_iter = 100

    def __init__(self, degree_a=2, degree_x=2, interaction_order=2, ridge=1e-3):
        self.degree_a = degree_a
        self.degree_x = degree_x
        self.interaction_order = interaction_order
        self.ridge = ridge

    def fit(self, Z, y):
        a, x = _split_design(Z)
        y = as_vector("y", y, expect_len=a.shape[0])
        if not np.all((y == 0.0) | (y == 1.0)):
            raise DataError("logistic fit requires a 0/1 outcome")
        spec = BasisSpec(self.degree_a, self.degree_x, self.interaction_order, self.ridge)
        self.basis_ = _TensorBasis(spec).fit(a, x)
        _check_size(a.shape[0], self.basis_.n_features)
        phi = self.basis_.transform(a, x)
        p_feat = phi.shape[1]
        pen = np.r_[0.0, np.full(p_feat - 1, self.ridge)]
        beta = np.zeros(p_feat)
        for _ in range(self.max_newton_iter):
            eta = phi @ beta
            prob = expit(eta)
            grad = phi.T @ (y - prob) - pen * beta
            if np.max(np.abs(grad)) < 1e-10:
                break
            w = np.clip(prob * (1.0 - prob), 1e-12, None)
            hess = (phi * w[:, None]).T @ phi
            hess[np.diag_indices(p_feat)] += pen
            try:
                step = np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                raise NumericalError(
                    "singular Hessian in logistic basis regression; set ridge > 0"
                ) from None
            beta = beta + step
            if np.max(np.abs(step)) < 1e-12:
                break
        self.coef_ = beta
        return self

    def predict(self, Z):
        check_is_fitted(self, "coef_")
        a, x = _split_design(Z)
        return self.at(a, x)

    def at(self, a, x) -> np.ndarray:
        check_is_fitted(self, "coef_")
        a = np.asarray(a, dtype=float)
        x = np.asarray(x, dtype=float)
        eta = self.basis_.transform(a, x) @ self.coef_
        return np.clip(expit(eta), MU_CLIP, 1.0 - MU_CLIP)


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    total = cum[-1]
    return float(v[np.searchsorted(cum, 0.5 * total, side="left")])


class PinballBasisRegressor(RegressorMixin, BaseEstimator):
    """Conditional median via mean absolute error on the tensor basis.

    A fixed-budget subgradient descent with a 1/sqrt(iter) step schedule,
    warm-started at the least squares solution and tracking the best iterate,
    followed by exact coordinate-descent polish sweeps so the fit is
    coordinate-wise optimal. Fully deterministic. The fitted
    ``stationarity_gap_`` records the largest one-coordinate improvement
    still available after polishing (zero when the polish converged).
    """

    polish_sweeps = 30

    def __init__(self, degree_a=2, degree_x=2, interaction_order=2, ridge=1e-3,
                 n_iter=2000, step=0.5):
        self.degree_a = degree_a
        self.degree_x = degree_x
        self.interaction_order = interaction_order
        self.ridge = ridge
        self.n_iter = n_iter
        self.step = step

    def fit(self, Z, y):
        a, x = _split_design(Z)
        y = as_vector("y", y, expect_len=a.shape[0])
        spec = BasisSpec(self.degree_a, self.degree_x, self.interaction_order, self.ridge)
        self.basis_ = _TensorBasis(spec).fit(a, x)
        _check_size(a.shape[0], self.basis_.n_features)
        phi = self.basis_.transform(a, x)
        n = phi.shape[0]

        beta = _ridge_solve(phi, y, max(self.ridge, 1e-8))
        resid = y - phi @ beta
        scale = max(float(np.median(np.abs(resid - np.median(resid)))), 1e-8)

        best_beta = beta.copy()
        best_loss = float(np.mean(np.abs(resid)))
        for it in range(self.n_iter):
            step = self.step * scale / np.sqrt(it + 1.0)
            beta = beta + step * (phi.T @ np.sign(resid)) / n
            resid = y - phi @ beta
            loss = float(np.mean(np.abs(resid)))
            if loss < best_loss:
                best_loss = loss
                best_beta = beta.copy()
        beta = best_beta
        resid = y - phi @ beta

        # Exact 1-d minimization per coordinate: the optimal shift of beta_j
        # is a weighted median of resid/phi_j with weights |phi_j|.
        for _ in range(self.polish_sweeps):
            moved = 0.0
            for j in range(phi.shape[1]):
                col = phi[:, j]
                nz = col != 0.0
                if not np.any(nz):
                    continue
                delta = _weighted_median(resid[nz] / col[nz], np.abs(col[nz]))
                if delta != 0.0:
                    beta[j] += delta
                    resid = resid - delta * col
                    moved = max(moved, abs(delta))
            if moved == 0.0:
                break

        loss_now = float(np.mean(np.abs(resid)))
        gap = 0.0
        for j in range(phi.shape[1]):
            col = phi[:, j]
            nz = col != 0.0
            if not np.any(nz):
                continue
            delta = _weighted_median(resid[nz] / col[nz], np.abs(col[nz]))
            gap = max(gap, loss_now - float(np.mean(np.abs(resid - delta * col))))
        self.stationarity_gap_ = gap
        self.coef_ = beta
        return self

    def training_loss(self, Z, y) -> float:
        """Mean absolute error of the fitted coefficients on (Z, y)."""
        return float(np.mean(np.abs(as_vector("y", y) - self.predict(Z))))

    def predict(self, Z):
        check_is_fitted(self, "coef_")
        a, x = _split_design(Z)
        return self.basis_.transform(a, x) @ self.coef_

    def at(self, a, x) -> np.ndarray:
        check_is_fitted(self, "coef_")
        a = np.asarray(a, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.basis_.transform(a, x) @ self.coef_


class LocationScaleScoreModel(BaseEstimator):
    """Conditional score of the exposure under a location-scale model.

    Fits m(x) = E[A | X] and v(x) = E[(A - m(X))^2 | X] by ridge basis
    regressions in x, and returns s(a | x) = -(a - m(x)) / max(v(x), floor),
    truncated to [-truncation, truncation]. The scale regression uses a
    lower-degree basis by default: squared residuals are far noisier than the
    exposure itself, and an over-flexible variance fit degrades the score.
    """

    def __init__(self, degree_x=2, scale_degree_x=1, ridge=1e-3, variance_floor=1e-3,
                 truncation=50.0):
        self.degree_x = degree_x
        self.scale_degree_x = scale_degree_x
        self.ridge = ridge
        self.variance_floor = variance_floor
        self.truncation = truncation

    def fit(self, x, a):
        x = as_matrix("x", x, min_cols=0)
        a = as_vector("a", a, expect_len=x.shape[0])
        if float(np.std(a)) == 0.0:
            raise DataError("degenerate exposure: all values are identical")
        spec = BasisSpec(degree_a=0, degree_x=self.degree_x, interaction_order=0, ridge=self.ridge)
        self.basis_ = _TensorBasis(spec, include_a=False).fit(a, x)
        _check_size(x.shape[0], self.basis_.n_features)
        phi = self.basis_.transform(a, x)
        self.loc_coef_ = _ridge_solve(phi, a, self.ridge)
        scale_spec = BasisSpec(degree_a=0, degree_x=self.scale_degree_x,
                               interaction_order=0, ridge=self.ridge)
        self.scale_basis_ = _TensorBasis(scale_spec, include_a=False).fit(a, x)
        resid2 = (a - phi @ self.loc_coef_) ** 2
        self.scale_coef_ = _ridge_solve(self.scale_basis_.transform(a, x), resid2, self.ridge)
        return self

    def location(self, x) -> np.ndarray:
        check_is_fitted(self, "loc_coef_")
        x = np.asarray(x, dtype=float)
        dummy = np.zeros(x.shape[0])
        return self.basis_.transform(dummy, x) @ self.loc_coef_

    def scale2(self, x) -> np.ndarray:
        check_is_fitted(self, "scale_coef_")
        x = np.asarray(x, dtype=float)
        dummy = np.zeros(x.shape[0])
        raw = self.scale_basis_.transform(dummy, x) @ self.scale_coef_
        return np.maximum(raw, self.variance_floor)

    def at(self, a, x) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        x = np.asarray(x, dtype=float)
        score = -(a - self.location(x)) / self.scale2(x)
        return np.clip(score, -self.truncation, self.truncation)


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(21)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()


def resmooth_mean(mu: Predictor, bandwidth: float) -> Predictor:
    """Gaussian-smoothed version of a mean predictor: E_Z mu(a + h*Z, x)."""
    if not bandwidth > 0:
        raise ConfigError("bandwidth must be > 0")

    def smoothed(a, x):
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for z, w in zip(_GH_NODES, _GH_WEIGHTS):
            out = out + w * np.asarray(mu(a + bandwidth * z, x), dtype=float)
        return out

    return smoothed


def resmooth_derivative(mu: Predictor, bandwidth: float) -> Predictor:
    """Exposure derivative of the Gaussian-smoothed mean predictor.

    Uses the kernel identity d/da E_Z[mu(a + h*Z, x)] = E_Z[mu(a + h*Z, x) * Z / h]
    on a fixed 21-node Gauss-Hermite grid with standard-normal weights, so any
    first-stage regression gains a differentiable version.
    """
    if not bandwidth > 0:
        raise ConfigError("bandwidth must be > 0")

    def derivative(a, x):
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for z, w in zip(_GH_NODES, _GH_WEIGHTS):
            if z == 0.0:
                continue
            out = out + (w * z) * np.asarray(mu(a + bandwidth * z, x), dtype=float)
        return out / bandwidth

    return derivative


@dataclass(frozen=True)
class NuisanceFit:
    """Bundle of fitted (or injected) nuisance predictors.

    ``median`` is None for binary outcomes, where the conditional mean plays
    the role of P(Y=1 | a, x).
    """

    mu: Predictor
    mu_prime: Predictor
    score: Predictor
    median: Predictor | None
    outcome_type: str

    def predict_mu(self, a, x) -> np.ndarray:
        return np.asarray(self.mu(a, x), dtype=float)

    def predict_mu_prime(self, a, x) -> np.ndarray:
        return np.asarray(self.mu_prime(a, x), dtype=float)

    def predict_score(self, a, x) -> np.ndarray:
        return np.asarray(self.score(a, x), dtype=float)

    def predict_median(self, a, x) -> np.ndarray:
        if self.median is None:
            raise DataError("median predictor is unavailable for binary outcomes")
        return np.asarray(self.median(a, x), dtype=float)


def fit_conditional_mean(train: Dataset, spec: BasisSpec) -> Predictor:
    """Fit E[Y | A, X] (continuous: ridge LS; binary: ridge logistic, clipped)."""
    Z = np.column_stack([train.a, train.x])
    if train.outcome_type == "binary":
        model = LogisticBasisRegressor(spec.degree_a, spec.degree_x, spec.interaction_order, spec.ridge)
    else:
        model = RidgeBasisRegressor(spec.degree_a, spec.degree_x, spec.interaction_order, spec.ridge)
    model.fit(Z, train.y)
    return model.at


def fit_score_location_scale(train: Dataset, spec: BasisSpec, variance_floor: float,
                             truncation: float = 50.0) -> Predictor:
    """Fit s(a | x) through the location-scale model of the exposure."""
    model = LocationScaleScoreModel(
        degree_x=spec.degree_x, ridge=spec.ridge,
        variance_floor=variance_floor, truncation=truncation,
    )
    model.fit(train.x, train.a)
    return model.at


def fit_conditional_median(train: Dataset, spec: BasisSpec, n_iter: int = 2000,
                           step: float = 0.5) -> Predictor:
    """Fit the conditional median of a continuous outcome by pinball loss."""
    if train.outcome_type == "binary":
        raise DataError("conditional median fitting is unsupported for binary outcomes")
    model = PinballBasisRegressor(
        spec.degree_a, spec.degree_x, spec.interaction_order, spec.ridge,
        n_iter=n_iter, step=step,
    )
    model.fit(np.column_stack([train.a, train.x]), train.y)
    return model.at


def fit_all(train: Dataset, config: RunConfig) -> NuisanceFit:
    """Fit the full nuisance bundle on one training fold."""
    if train.outcome_type != config.outcome_type:
        raise ConfigError("dataset outcome_type does not match the run configuration")
    spec = BasisSpec(config.basis_degree_a, config.basis_degree_x,
                     config.interaction_order, config.ridge)
    bandwidth = config.resmooth_bandwidth
    if bandwidth is None:
        bandwidth = 0.2 * float(np.std(train.a))
        if bandwidth <= 0:
            raise DataError("degenerate exposure: all values are identical")
    mu = fit_conditional_mean(train, spec)
    mu_prime = resmooth_derivative(mu, bandwidth)
    score = fit_score_location_scale(train, spec, config.variance_floor, config.score_truncation)
    median = None
    if train.outcome_type == "continuous":
        median = fit_conditional_median(train, spec, config.median_iters, config.median_step)
    return NuisanceFit(mu=mu, mu_prime=mu_prime, score=score, median=median,
                       outcome_type=train.outcome_type)
