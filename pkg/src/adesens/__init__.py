"""adesens: sensitivity analysis for average derivative effects.

Computes worst-case bounds, cross-fitted estimates, and pointwise plus
simultaneous confidence bands for the average derivative effect of a
continuous exposure when unmeasured confounding is allowed to shift the
generalized propensity score within odds-ratio bounds. Includes an
independent optimization oracle for the closed-form bounds, model-implication
checks for exponential-tilt dose models, and a Monte-Carlo coverage harness.
"""

from .bounds import (
    CorrectionTerm,
    WeightFn,
    correction_binary_exact,
    correction_continuous,
    lse_h,
    lse_h_prime,
    plugin_bounds_continuous,
    unit_weight,
    weighted_base_and_correction,
)
from .data import (
    Dataset,
    GammaGrid,
    ObservedSample,
    RunConfig,
    derive_rng,
    load_config,
    load_csv,
    make_folds,
    write_csv,
)
from .dgp import DgpCoefficients, DgpSpec, analytic_ade, draw_coefficients, draw_dataset
from .errors import AdeSensError, ConfigError, DataError, NumericalError
from .estimator import AdeSensitivity
from .inference import (
    BoundEstimate,
    Crossings,
    EifDecomposition,
    SensitivityCurve,
    analyze,
    cross_fitted_eif,
    eif_terms,
    estimate_bounds,
    sensitivity_curve,
)
from .nuisance import (
    BasisSpec,
    LocationScaleScoreModel,
    LogisticBasisRegressor,
    NuisanceFit,
    PinballBasisRegressor,
    RidgeBasisRegressor,
    fit_all,
    fit_conditional_mean,
    fit_conditional_median,
    fit_score_location_scale,
    resmooth_derivative,
    resmooth_mean,
)
from .oracle import (
    RosenbaumModel,
    StratumInstance,
    StratumSolution,
    VerificationReport,
    ade_via_score_mc,
    closed_form_stratum,
    ground_truth_ade,
    ground_truth_ade_detail,
    solve_stratum,
    verify_model_implication,
    verify_propositions,
)
from .simulate import CoverageCell, CoverageReport, coverage_experiment, emit_table

__version__ = "0.1.0"

__all__ = [
    "AdeSensError",
    "AdeSensitivity",
    "BasisSpec",
    "BoundEstimate",
    "ConfigError",
    "CorrectionTerm",
    "CoverageCell",
    "CoverageReport",
    "Crossings",
    "DataError",
    "Dataset",
    "DgpCoefficients",
    "DgpSpec",
    "EifDecomposition",
    "GammaGrid",
    "LocationScaleScoreModel",
    "LogisticBasisRegressor",
    "NumericalError",
    "NuisanceFit",
    "ObservedSample",
    "PinballBasisRegressor",
    "RidgeBasisRegressor",
    "RosenbaumModel",
    "RunConfig",
    "SensitivityCurve",
    "StratumInstance",
    "StratumSolution",
    "VerificationReport",
    "WeightFn",
    "ade_via_score_mc",
    "analytic_ade",
    "analyze",
    "closed_form_stratum",
    "correction_binary_exact",
    "correction_continuous",
    "coverage_experiment",
    "cross_fitted_eif",
    "derive_rng",
    "draw_coefficients",
    "draw_dataset",
    "eif_terms",
    "emit_table",
    "estimate_bounds",
    "fit_all",
    "fit_conditional_mean",
    "fit_conditional_median",
    "fit_score_location_scale",
    "ground_truth_ade",
    "ground_truth_ade_detail",
    "load_config",
    "load_csv",
    "lse_h",
    "lse_h_prime",
    "make_folds",
    "plugin_bounds_continuous",
    "resmooth_derivative",
    "resmooth_mean",
    "sensitivity_curve",
    "solve_stratum",
    "unit_weight",
    "verify_model_implication",
    "verify_propositions",
    "weighted_base_and_correction",
    "write_csv",
]
