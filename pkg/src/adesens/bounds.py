"""Closed-form bound functionals: LSE smoothing, corrections, weighted variants.

Everything here is a pure function of its arguments; estimation and
randomness live elsewhere. The worst-case bounds are affine in the
sensitivity parameter, ``psi = base +/- gamma * correction`` with a
nonnegative correction term, and these helpers supply the pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError

CORRECTION_KINDS = ("continuous_median", "binary_lse")


@dataclass(frozen=True)
class CorrectionTerm:
    """The multiplier of gamma in an affine bound.

    For the smoothed binary functional the value may dip slightly below zero
    near degenerate probabilities, but never below -log(2)/t.
    """

    value: float
    kind: str
    t: float = 50.0

    def __post_init__(self):
        if self.kind not in CORRECTION_KINDS:
            raise DataError(f"unknown correction kind {self.kind!r}")
        floor = -math.log(2.0) / self.t if self.kind == "binary_lse" else 0.0
        if self.value < floor - 1e-12:
            raise DataError(f"correction value {self.value} below admissible floor {floor}")


def lse_h(p, t: float):
    """Soft-min of (p, 1-p): -(1/t) * log(exp(-t*p) + exp(-t*(1-p))).

    Overflow-safe via pairwise log-add-exp; satisfies
    min(p, 1-p) - log(2)/t <= lse_h(p, t) <= min(p, 1-p).
    """
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise DataError("p must lie in [0, 1]")
    if not t > 0:
        raise DataError("t must be > 0")
    out = -np.logaddexp(-t * p, -t * (1.0 - p)) / t
    return out if out.ndim else float(out)


def lse_h_prime(p, t: float):
    """Derivative of lse_h in p; equals tanh(t * (1 - 2p) / 2)."""
    p = np.asarray(p, dtype=float)
    if not t > 0:
        raise DataError("t must be > 0")
    out = np.tanh(t * (0.5 - p))
    return out if out.ndim else float(out)


def plugin_bounds_continuous(base: float, correction: float, gamma: float) -> tuple[float, float]:
    """Affine worst-case bounds (psi_min, psi_max) = base -/+ gamma*correction."""
    if gamma < 0:
        raise DataError("gamma must be >= 0")
    if correction < 0:
        raise DataError("correction must be >= 0")
    return base - gamma * correction, base + gamma * correction


def correction_continuous(y, m):
    """Plug-in correction integrand for continuous outcomes: y * sign(y - m).

    Ties y == m contribute zero (the tie convention; ties only arise through
    estimation).
    """
    y = np.asarray(y, dtype=float)
    m = np.asarray(m, dtype=float)
    out = y * np.sign(y - m)
    return out if out.ndim else float(out)


def correction_binary_exact(p):
    """Exact (non-smoothed) binary correction integrand: min(p, 1 - p)."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise DataError("p must lie in [0, 1]")
    out = np.minimum(p, 1.0 - p)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WeightFn:
    """A known nonnegative weight w(a, x) with its exposure derivative.

    The caller is responsible for E[w(A, X)] = 1 on the analysis sample;
    nonnegativity is enforced wherever the weight is evaluated.
    """

    w: Callable[[np.ndarray, np.ndarray], np.ndarray]
    w_prime: Callable[[np.ndarray, np.ndarray], np.ndarray]


def unit_weight() -> WeightFn:
    """The trivial weight w == 1, w' == 0."""
    return WeightFn(
        w=lambda a, x: np.ones_like(np.asarray(a, dtype=float)),
        w_prime=lambda a, x: np.zeros_like(np.asarray(a, dtype=float)),
    )


def evaluate_weight(weight: WeightFn, a, x) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (w, w') at (a, x), rejecting negative weights."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    w = np.broadcast_to(np.asarray(weight.w(a, x), dtype=float), a.shape).copy()
    wp = np.broadcast_to(np.asarray(weight.w_prime(a, x), dtype=float), a.shape).copy()
    if np.any(w < 0):
        raise DataError("weight function produced a negative value")
    return w, wp


def weighted_base_and_correction(y, a, x, fit, weight: WeightFn, t: float = 50.0):
    """Plug-in contributions to the weighted bounds at points (y, a, x).

    Returns per-point (base, correction) where base = -w'*y - w*s(a|x)*y and
    correction = w times the outcome-appropriate correction integrand
    (sign-of-median-residual for continuous outcomes, lse_h of the
    conditional probability for binary ones). With w == 1, w' == 0 this is
    exactly the unweighted plug-in form.
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    w, wp = evaluate_weight(weight, a, x)
    s = np.asarray(fit.predict_score(a, x), dtype=float)
    base = -wp * y - w * s * y
    if fit.outcome_type == "binary":
        corr = w * lse_h(fit.predict_mu(a, x), t)
    else:
        corr = w * correction_continuous(y, fit.predict_median(a, x))
    return base, corr
