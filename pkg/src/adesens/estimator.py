"""sklearn-style front end for the sensitivity analysis."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bounds import WeightFn
from .data import Dataset, GammaGrid, RunConfig
from .inference import BoundEstimate, SensitivityCurve, cross_fitted_eif, estimate_bounds, sensitivity_curve
from .validation import as_matrix, as_vector


class AdeSensitivity(BaseEstimator):
    """Cross-fitted sensitivity bounds for the average derivative effect.

    Fits nuisance models by K-fold cross-fitting and exposes the affine
    worst-case bounds a_hat +/- gamma * b_hat with pointwise one-sided
    intervals, simultaneous bands over gamma ranges, and crossing points.
    Hyperparameters live in ``__init__`` so the estimator composes with
    scikit-learn tooling (``get_params``, ``set_params``, ``clone``).

    Parameters mirror :class:`adesens.data.RunConfig`; see there for details.

    Attributes (after ``fit``)
    --------------------------
    a_hat_, b_hat_ : float
        Estimates of the unconfounded functional and the correction term.
    se_a_, se_b_ : float
        Influence-function standard errors of the two components.
    eif_ : EifDecomposition
        Per-sample influence values, reusable across gamma grids.
    """

    def __init__(self, outcome_type="continuous", n_folds=5, t=50.0, alpha=0.05,
                 seed=0, score_truncation=50.0, degree_a=2, degree_x=2,
                 interaction_order=2, ridge=1e-3, resmooth_bandwidth=None,
                 variance_floor=1e-3, median_iters=2000, median_step=0.5):
        self.outcome_type = outcome_type
        self.n_folds = n_folds
        self.t = t
        self.alpha = alpha
        self.seed = seed
        self.score_truncation = score_truncation
        self.degree_a = degree_a
        self.degree_x = degree_x
        self.interaction_order = interaction_order
        self.ridge = ridge
        self.resmooth_bandwidth = resmooth_bandwidth
        self.variance_floor = variance_floor
        self.median_iters = median_iters
        self.median_step = median_step

    def _config(self) -> RunConfig:
        return RunConfig(
            outcome_type=self.outcome_type,
            folds=self.n_folds,
            lse_t=self.t,
            alpha=self.alpha,
            seed=self.seed,
            score_truncation=self.score_truncation,
            basis_degree_a=self.degree_a,
            basis_degree_x=self.degree_x,
            interaction_order=self.interaction_order,
            ridge=self.ridge,
            resmooth_bandwidth=self.resmooth_bandwidth,
            variance_floor=self.variance_floor,
            median_iters=self.median_iters,
            median_step=self.median_step,
        )

    def fit(self, y, a, x=None, weights: WeightFn | None = None):
        """Cross-fit nuisances on (y, a, x) and store the influence terms.

        x may be omitted for covariate-free analyses. ``weights`` switches to
        the weighted functional for a known weight function.
        """
        y = as_vector("y", y)
        a = as_vector("a", a, expect_len=y.shape[0])
        x = np.empty((y.shape[0], 0)) if x is None else as_matrix("x", x, expect_rows=y.shape[0])
        dataset = Dataset(y, a, x, self.outcome_type)
        self.eif_ = cross_fitted_eif(dataset, self._config(), weights=weights)
        self.n_ = dataset.n
        self.a_hat_ = float(np.mean(self.eif_.base_if))
        self.b_hat_ = float(np.mean(self.eif_.corr_if))
        self.se_a_ = float(np.std(self.eif_.base_if, ddof=1) / math.sqrt(self.n_))
        self.se_b_ = float(np.std(self.eif_.corr_if, ddof=1) / math.sqrt(self.n_))
        return self

    def bounds_at(self, gamma: float) -> BoundEstimate:
        """Bound estimates with one-sided confidence limits at a single gamma."""
        check_is_fitted(self, "eif_")
        return estimate_bounds(self.eif_, gamma, self.alpha)

    def curve(self, gamma_hi: float = math.log(2.0), n_points: int = 25,
              gamma_lo: float = 0.0, reference: float = 0.0) -> SensitivityCurve:
        """Sensitivity curve over an inclusive gamma grid, with crossings."""
        check_is_fitted(self, "eif_")
        grid = GammaGrid(gamma_lo, gamma_hi, n_points)
        return sensitivity_curve(self.eif_, grid, alpha=self.alpha, reference=reference)
