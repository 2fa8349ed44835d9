"""Synthetic data-generating processes for the simulation study.

Covariates are Unif[0,1]^d, a binary latent confounder U | X follows
Bern(Phi(sin(x1 + x2))), the dose is Gaussian or Gamma with U shifting its
location/rate, and the outcome is linear-Gaussian or probit in
(A, X, U, A*X). Coefficients are redrawn per replication from fixed
distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import DGP_STREAM, Dataset, derive_rng
from .errors import ConfigError

DOSE_FAMILIES = ("gaussian", "gamma")
GAMMA_DOSE_SHAPE = 13.0
GAMMA_DOSE_RATE_BASE = 8.0
GAMMA_DOSE_RATE_FLOOR = 0.1


@dataclass(frozen=True)
class DgpSpec:
    """Simulation setting: dose family, outcome type, confounding strengths."""

    dose_family: str = "gaussian"
    outcome_type: str = "continuous"
    delta: float = 0.0
    zeta: float = math.log(2.0)
    d: int = 5
    eta: float = 1.0

    def __post_init__(self):
        if self.dose_family not in DOSE_FAMILIES:
            raise ConfigError(f"unknown dose family {self.dose_family!r}")
        if self.outcome_type not in ("continuous", "binary"):
            raise ConfigError(f"unknown outcome_type {self.outcome_type!r}")
        if self.d < 1:
            raise ConfigError("d must be >= 1")


@dataclass(frozen=True)
class DgpCoefficients:
    """One replication's drawn coefficients."""

    theta: tuple[float, ...]
    beta: tuple[float, ...]
    eta_ax: tuple[float, ...]

    @property
    def theta_arr(self) -> np.ndarray:
        return np.asarray(self.theta)

    @property
    def beta_arr(self) -> np.ndarray:
        return np.asarray(self.beta)

    @property
    def eta_ax_arr(self) -> np.ndarray:
        return np.asarray(self.eta_ax)


@dataclass(frozen=True)
class DgpContext:
    """Hidden truth behind one drawn dataset."""

    coeffs: DgpCoefficients
    u: np.ndarray
    n_rate_floored: int


def draw_coefficients(spec: DgpSpec, rng: np.random.Generator) -> DgpCoefficients:
    """theta ~ N(0,1), beta ~ N(-1,1), interaction slopes ~ N(0, 1/4), per component."""
    theta = rng.normal(0.0, 1.0, spec.d)
    beta = rng.normal(-1.0, 1.0, spec.d)
    eta_ax = rng.normal(0.0, 0.5, spec.d)
    return DgpCoefficients(tuple(theta), tuple(beta), tuple(eta_ax))


def draw_joint(spec: DgpSpec, coeffs: DgpCoefficients, n: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Draw (a, x, u) plus the count of Gamma rates that hit the floor."""
    x = rng.uniform(0.0, 1.0, (n, spec.d))
    u = (rng.uniform(0.0, 1.0, n) < norm.cdf(np.sin(x[:, 0] + x[:, 1]))).astype(float)
    loc = x @ coeffs.theta_arr
    n_floored = 0
    if spec.dose_family == "gaussian":
        a = rng.normal(0.0, 1.0, n) + loc + spec.zeta * u
    else:
        rate = GAMMA_DOSE_RATE_BASE + loc - spec.zeta * u
        n_floored = int(np.sum(rate < GAMMA_DOSE_RATE_FLOOR))
        rate = np.maximum(rate, GAMMA_DOSE_RATE_FLOOR)
        a = rng.gamma(GAMMA_DOSE_SHAPE, 1.0 / rate, n)
    return a, x, u, n_floored


def latent_index(spec: DgpSpec, coeffs: DgpCoefficients, a, x, u) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return (spec.eta * a + np.asarray(x) @ coeffs.beta_arr + spec.delta * np.asarray(u)
            + a * (np.asarray(x) @ coeffs.eta_ax_arr))


def draw_outcome(spec: DgpSpec, coeffs: DgpCoefficients, a, x, u,
                 rng: np.random.Generator) -> np.ndarray:
    index = latent_index(spec, coeffs, a, x, u)
    if spec.outcome_type == "binary":
        return (rng.uniform(0.0, 1.0, index.shape[0]) < norm.cdf(index)).astype(float)
    return index + rng.normal(0.0, 1.0, index.shape[0])


def latent_derivative(spec: DgpSpec, coeffs: DgpCoefficients, a, x, u) -> np.ndarray:
    """d/da E[Y | a, x, u] in closed form for either outcome model."""
    slope = spec.eta + np.asarray(x) @ coeffs.eta_ax_arr
    if spec.outcome_type == "binary":
        return norm.pdf(latent_index(spec, coeffs, a, x, u)) * slope
    return np.broadcast_to(slope, np.asarray(a).shape).copy()


def latent_dose_score(spec: DgpSpec, coeffs: DgpCoefficients, a, x, u) -> np.ndarray:
    """s(a | x, u) = d/da log f(a | x, u) under the dose model."""
    a = np.asarray(a, dtype=float)
    loc = np.asarray(x) @ coeffs.theta_arr
    if spec.dose_family == "gaussian":
        return -(a - loc - spec.zeta * np.asarray(u))
    rate = np.maximum(GAMMA_DOSE_RATE_BASE + loc - spec.zeta * np.asarray(u),
                      GAMMA_DOSE_RATE_FLOOR)
    return (GAMMA_DOSE_SHAPE - 1.0) / a - rate


def analytic_ade(spec: DgpSpec, coeffs: DgpCoefficients) -> float:
    """Closed-form truth for the continuous outcome: eta + eta_ax' E[X]."""
    if spec.outcome_type != "continuous":
        raise ConfigError("analytic truth is only available for continuous outcomes")
    return spec.eta + 0.5 * float(np.sum(coeffs.eta_ax_arr))


def draw_dataset(spec: DgpSpec, n: int, seed) -> tuple[Dataset, DgpContext]:
    """Draw one replication: fresh coefficients, then (Y, A, X) with hidden context.

    seed may be an integer or an existing Generator (for derived streams).
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, DGP_STREAM)
    coeffs = draw_coefficients(spec, rng)
    a, x, u, n_floored = draw_joint(spec, coeffs, n, rng)
    y = draw_outcome(spec, coeffs, a, x, u, rng)
    dataset = Dataset(y, a, x, spec.outcome_type)
    return dataset, DgpContext(coeffs=coeffs, u=u, n_rate_floored=n_floored)
