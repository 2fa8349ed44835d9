"""Cross-fitted estimation of the bounds, Wald intervals, simultaneous bands
over a gamma grid, and crossing points.

The estimated bounds are affine in gamma, psi_hat(gamma) = a_hat +/- gamma *
b_hat, with a_hat the influence-function mean for the unconfounded functional
E[-s(A|X) Y] and b_hat the mean of the correction term. Pointwise one-sided
intervals follow the Wald construction; simultaneous bands combine a
two-sided (1 - alpha/2) interval for a with a one-sided (1 - alpha/2) upper
bound for b through the union bound. Binary outcomes carry a constant
log(2)/t widening that converts intervals for the smoothed functional into
intervals for the exact one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .bounds import WeightFn, correction_continuous, evaluate_weight, lse_h, lse_h_prime
from .data import Dataset, GammaGrid, RunConfig, make_folds
from .errors import AdeSensError, DataError
from .nuisance import NuisanceFit, fit_all


@dataclass(frozen=True)
class EifDecomposition:
    """Per-sample uncentered influence values for the two affine components.

    base_if estimates a = E[-s(A|X) Y]; corr_if estimates the correction b.
    For continuous outcomes corr_if = |y - median| is nonnegative pointwise.
    """

    base_if: np.ndarray
    corr_if: np.ndarray
    outcome_type: str
    t: float

    def __post_init__(self):
        base = np.asarray(self.base_if, dtype=float)
        corr = np.asarray(self.corr_if, dtype=float)
        if base.ndim != 1 or corr.ndim != 1 or base.shape != corr.shape:
            raise DataError("base_if and corr_if must be 1-d arrays of equal length")
        if base.shape[0] == 0:
            raise DataError("empty influence decomposition")
        if self.outcome_type == "continuous" and np.any(corr < -1e-12):
            raise DataError("continuous correction influence values must be nonnegative")
        object.__setattr__(self, "base_if", base)
        object.__setattr__(self, "corr_if", corr)

    @property
    def n(self) -> int:
        return self.base_if.shape[0]


def eif_terms(dataset: Dataset, fits: Sequence[NuisanceFit], folds: np.ndarray,
              t: float = 50.0, weights: WeightFn | None = None) -> EifDecomposition:
    """Evaluate the influence components with out-of-fold predictions only.

    fits[k] must have been trained without the samples assigned to fold k.
    With a weight function the components target the weighted functional:
    base = w*mu' - (w' + w*s)(y - mu), correction = w times the unweighted
    correction influence, which reduces exactly to the unweighted form at
    w == 1.
    """
    folds = np.asarray(folds)
    if folds.shape != (dataset.n,):
        raise AdeSensError("fold assignment length does not match the dataset")
    used = np.unique(folds)
    if used.min() < 0 or used.max() >= len(fits):
        raise AdeSensError(f"fold ids {used} do not match the {len(fits)} provided fits")

    base = np.empty(dataset.n)
    corr = np.empty(dataset.n)
    for k in range(len(fits)):
        idx = np.flatnonzero(folds == k)
        if idx.size == 0:
            continue
        fit = fits[k]
        if fit.outcome_type != dataset.outcome_type:
            raise AdeSensError("nuisance fit outcome_type does not match the dataset")
        y, a, x = dataset.y[idx], dataset.a[idx], dataset.x[idx]
        mu = fit.predict_mu(a, x)
        mup = fit.predict_mu_prime(a, x)
        s = fit.predict_score(a, x)
        if dataset.outcome_type == "binary":
            c = lse_h(mu, t) + lse_h_prime(mu, t) * (y - mu)
        else:
            m = fit.predict_median(a, x)
            c = (y - m) * np.sign(y - m)
        b = mup - s * (y - mu)
        if weights is not None:
            w, wp = evaluate_weight(weights, a, x)
            b = w * mup - (wp + w * s) * (y - mu)
            c = w * c
        base[idx] = b
        corr[idx] = c
    return EifDecomposition(base, corr, dataset.outcome_type, float(t))


@dataclass(frozen=True)
class BoundEstimate:
    """Bound estimates and one-sided confidence limits at a single gamma."""

    gamma: float
    psi_min_hat: float
    psi_max_hat: float
    var_min: float
    var_max: float
    ci_lower: float
    ci_upper: float
    lse_correction_applied: float


def _moments(eif: EifDecomposition) -> tuple[float, float, float, float, float]:
    if eif.n < 2:
        raise DataError("at least two samples are required for a variance estimate")
    a_hat = float(np.mean(eif.base_if))
    b_hat = float(np.mean(eif.corr_if))
    va = float(np.var(eif.base_if, ddof=1))
    vb = float(np.var(eif.corr_if, ddof=1))
    cab = float(np.cov(eif.base_if, eif.corr_if, ddof=1)[0, 1])
    return a_hat, b_hat, va, vb, cab


def _lse_shift(eif: EifDecomposition) -> float:
    return math.log(2.0) / eif.t if eif.outcome_type == "binary" else 0.0


def estimate_bounds(eif: EifDecomposition, gamma: float, alpha: float = 0.05) -> BoundEstimate:
    """Point estimates, plug-in variances, and one-sided Wald limits at gamma.

    ci_upper/ci_lower are the (1 - alpha) upper/lower confidence limits for
    psi_max/psi_min; for binary outcomes both are widened by log(2)/t so they
    cover the exact (non-smoothed) bounds.
    """
    if gamma < 0:
        raise DataError("gamma must be >= 0")
    if not 0 < alpha < 1:
        raise DataError("alpha must be in (0, 1)")
    a_hat, b_hat, va, vb, cab = _moments(eif)
    n = eif.n
    var_max = max(va + 2.0 * gamma * cab + gamma * gamma * vb, 0.0)
    var_min = max(va - 2.0 * gamma * cab + gamma * gamma * vb, 0.0)
    z = float(norm.ppf(1.0 - alpha))
    shift = _lse_shift(eif)
    psi_max = a_hat + gamma * b_hat
    psi_min = a_hat - gamma * b_hat
    return BoundEstimate(
        gamma=float(gamma),
        psi_min_hat=psi_min,
        psi_max_hat=psi_max,
        var_min=var_min,
        var_max=var_max,
        ci_lower=psi_min - z * math.sqrt(var_min / n) - shift,
        ci_upper=psi_max + z * math.sqrt(var_max / n) + shift,
        lse_correction_applied=shift,
    )


@dataclass(frozen=True)
class Crossings:
    """Gamma values where a bound or its confidence limit reaches the reference.

    None means the quantity never reaches the reference (flat or receding
    bounds); 0.0 means it is already at or past the reference at gamma = 0.
    """

    point: float | None
    pointwise: float | None
    simultaneous: float | None


def _wald_crossing(d0: float, slope: float, z: float, var0: float, cov_signed: float,
                   var_slope: float, n: int) -> float | None:
    """Smallest gamma >= 0 solving d0 - gamma*slope = z*sqrt((var0 + 2*gamma*cov + gamma^2*var_slope)/n).

    d0 is the margin of the estimate over the reference at gamma = 0 (already
    including any constant LSE shift). Closed form from squaring the Wald
    equation; the spurious branch is removed by the d0 - gamma*slope >= 0
    condition.
    """
    if d0 <= z * math.sqrt(var0 / n):
        return 0.0
    A = slope * slope - z * z * var_slope / n
    B = -2.0 * (d0 * slope - z * z * cov_signed / n)
    C = d0 * d0 - z * z * var0 / n
    if A == 0.0:
        if B == 0.0:
            return None
        candidates = [-C / B]
    else:
        disc = B * B - 4.0 * A * C
        if disc < 0.0:
            return None
        root = math.sqrt(disc)
        candidates = [(-B - root) / (2.0 * A), (-B + root) / (2.0 * A)]
    tol = 1e-12 * max(1.0, abs(d0))
    valid = [g for g in candidates if g >= -tol and d0 - g * slope >= -tol]
    if not valid:
        return None
    return max(min(valid), 0.0)


def _linear_crossing(margin: float, slope: float) -> float | None:
    if slope <= 0:
        return None
    return max(margin, 0.0) / slope if margin > 0 else 0.0


@dataclass(frozen=True)
class SensitivityCurve:
    """Bound estimates over a gamma grid plus a simultaneous band and crossings."""

    gammas: np.ndarray
    estimates: tuple[BoundEstimate, ...]
    a_hat: float
    b_hat: float
    se_a: float
    se_b: float
    cov_ab: float
    n: int
    alpha: float
    t: float
    outcome_type: str
    reference: float
    a_lower: float
    a_upper: float
    b_upper: float
    crossings: Crossings

    @property
    def lse_shift(self) -> float:
        return math.log(2.0) / self.t if self.outcome_type == "binary" else 0.0

    def simultaneous_lower(self, gamma) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        return self.a_lower - gamma * self.b_upper - self.lse_shift

    def simultaneous_upper(self, gamma) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=float)
        return self.a_upper + gamma * self.b_upper + self.lse_shift

    def to_dict(self) -> dict:
        """JSON-ready mapping: {alpha, t, grid, a_hat, b_hat, se_a, se_b, crossings}."""
        rows = []
        for est in self.estimates:
            g = est.gamma
            rows.append({
                "gamma": g,
                "psi_min": est.psi_min_hat,
                "psi_max": est.psi_max_hat,
                "ci_lower": est.ci_lower,
                "ci_upper": est.ci_upper,
                "sim_lower": float(self.simultaneous_lower(g)),
                "sim_upper": float(self.simultaneous_upper(g)),
            })
        return {
            "alpha": self.alpha,
            "t": self.t,
            "grid": rows,
            "a_hat": self.a_hat,
            "b_hat": self.b_hat,
            "se_a": self.se_a,
            "se_b": self.se_b,
            "crossings": {
                "point": self.crossings.point,
                "pointwise": self.crossings.pointwise,
                "simultaneous": self.crossings.simultaneous,
            },
        }


def _solve_crossings(a_hat, b_hat, se_a, se_b, cov_ab, n, alpha, shift, reference) -> Crossings:
    """Crossings of the shrinking bound arm (lower if a_hat > reference, upper
    if below) with the reference value; affine/quadratic closed forms only."""
    if b_hat <= 0:
        return Crossings(None, None, None)
    z1 = float(norm.ppf(1.0 - alpha))
    z_a = float(norm.ppf(1.0 - alpha / 4.0))
    z_b = float(norm.ppf(1.0 - alpha / 2.0))
    b_upper = b_hat + z_b * se_b
    va, vb = se_a * se_a * n, se_b * se_b * n
    cab = cov_ab
    if a_hat == reference:
        return Crossings(0.0, 0.0, 0.0)
    if a_hat > reference:
        # Lower arms fall toward the reference.
        point = _linear_crossing(a_hat - reference, b_hat)
        pointwise = _wald_crossing(a_hat - shift - reference, b_hat, z1, va, cab, vb, n)
        sim = _linear_crossing(a_hat - z_a * se_a - shift - reference, b_upper)
    else:
        # Upper arms rise toward the reference; the covariance sign flips.
        point = _linear_crossing(reference - a_hat, b_hat)
        pointwise = _wald_crossing(reference - a_hat - shift, b_hat, z1, va, -cab, vb, n)
        sim = _linear_crossing(reference - a_hat - z_a * se_a - shift, b_upper)
    return Crossings(point, pointwise, sim)


def sensitivity_curve(eif: EifDecomposition, grid: GammaGrid, alpha: float = 0.05,
                      reference: float = 0.0) -> SensitivityCurve:
    """Bound estimates over the grid with a (1 - alpha) simultaneous band.

    The band combines the two-sided (1 - alpha/2) interval for a with the
    one-sided (1 - alpha/2) upper bound for b: upper(g) = a_U + g*b_U,
    lower(g) = a_L - g*b_U. b_U enters both arms because the lower bound
    a - g*b is worst-cased by large b.
    """
    if not 0 < alpha < 1:
        raise DataError("alpha must be in (0, 1)")
    a_hat, b_hat, va, vb, cab = _moments(eif)
    n = eif.n
    se_a = math.sqrt(va / n)
    se_b = math.sqrt(vb / n)
    z_a = float(norm.ppf(1.0 - alpha / 4.0))
    z_b = float(norm.ppf(1.0 - alpha / 2.0))
    shift = _lse_shift(eif)
    estimates = tuple(estimate_bounds(eif, g, alpha) for g in grid.points)
    crossings = _solve_crossings(a_hat, b_hat, se_a, se_b, cab, n, alpha, shift, reference)
    return SensitivityCurve(
        gammas=grid.points,
        estimates=estimates,
        a_hat=a_hat,
        b_hat=b_hat,
        se_a=se_a,
        se_b=se_b,
        cov_ab=cab,
        n=n,
        alpha=alpha,
        t=eif.t,
        outcome_type=eif.outcome_type,
        reference=reference,
        a_lower=a_hat - z_a * se_a,
        a_upper=a_hat + z_a * se_a,
        b_upper=b_hat + z_b * se_b,
        crossings=crossings,
    )


def cross_fitted_eif(dataset: Dataset, config: RunConfig,
                     weights: WeightFn | None = None) -> EifDecomposition:
    """K-fold cross-fitted influence decomposition for a dataset."""
    if dataset.outcome_type != config.outcome_type:
        raise DataError("dataset outcome_type does not match the run configuration")
    folds = make_folds(dataset.n, config.folds, config.seed)
    fits = [fit_all(dataset.subset(folds != k), config) for k in range(config.folds)]
    return eif_terms(dataset, fits, folds, t=config.lse_t, weights=weights)


def analyze(dataset: Dataset, config: RunConfig, grid: GammaGrid,
            weights: WeightFn | None = None, reference: float = 0.0) -> SensitivityCurve:
    """Full pipeline: fold split, per-fold nuisance fits, influence terms, curve.

    Deterministic given config.seed.
    """
    eif = cross_fitted_eif(dataset, config, weights=weights)
    return sensitivity_curve(eif, grid, alpha=config.alpha, reference=reference)
