"""Independent verification machinery.

Three kinds of checks live here, deliberately decoupled from the estimation
code so they can certify it:

* an exact greedy/LP solver for the per-stratum worst-case optimization,
  compared against the closed-form bound functionals on random instances;
* quadrature checks that the exponential-tilt dose model satisfies the
  odds-ratio sensitivity model, the score-gap constraint, and the
  score-integration identity;
* Monte-Carlo ground-truth computation of the average derivative effect for
  the synthetic DGPs, including the negative-score representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bounds import correction_binary_exact
from .data import MC_STREAM, derive_rng
from .dgp import DgpCoefficients, DgpSpec, draw_joint, draw_outcome, latent_derivative, latent_dose_score
from .errors import DataError

DIRECTIONS = ("max", "min")


@dataclass(frozen=True)
class StratumInstance:
    """A discretized conditional outcome distribution inside one (a, x) stratum.

    y_values are strictly increasing support points; probs are nonnegative and
    sum to one; s0 is the observed conditional score; gamma the box half-width.
    """

    y_values: np.ndarray
    probs: np.ndarray
    s0: float
    gamma: float

    def __post_init__(self):
        y = np.asarray(self.y_values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if y.ndim != 1 or p.shape != y.shape or y.size == 0:
            raise DataError("y_values and probs must be matching 1-d arrays")
        if np.any(p < 0):
            raise DataError("probs must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise DataError("probs must sum to 1 within 1e-12")
        if self.gamma < 0:
            raise DataError("gamma must be >= 0")
        # Canonicalize: sort by outcome and merge equal-y atoms, so instances
        # are invariant to input order and atom splitting.
        uy, inverse = np.unique(y, return_inverse=True)
        up = np.zeros(uy.size)
        np.add.at(up, inverse, p)
        object.__setattr__(self, "y_values", uy)
        object.__setattr__(self, "probs", up)

    @property
    def mean_y(self) -> float:
        return float(self.probs @ self.y_values)


@dataclass(frozen=True)
class StratumSolution:
    """Optimal latent score assignment and objective for one stratum."""

    s_star: np.ndarray
    objective: float
    split_point: float
    fractional_mass: float


def _median_atom(probs: np.ndarray) -> tuple[int, float]:
    """Index of the mass-median atom and the share of it below the half split."""
    cum = np.cumsum(probs)
    m = int(np.searchsorted(cum, 0.5, side="left"))
    below = cum[m - 1] if m > 0 else 0.0
    frac_low = (0.5 - below) / probs[m] if probs[m] > 0 else 1.0
    return m, float(frac_low)


def solve_stratum(inst: StratumInstance, direction: str = "max") -> StratumSolution:
    """Exact solution of the per-stratum program.

    Optimize sum_i p_i (-s_i) y_i over s_i in [s0 - gamma, s0 + gamma] subject
    to sum_i p_i s_i = s0. The optimum splits mass in half by outcome rank:
    for the maximum, the low-outcome half takes s0 + gamma and the
    high-outcome half s0 - gamma, with a fractional (interior-value) atom at
    the split. This is the exact LP optimum (Neyman-Pearson split).
    """
    if direction not in DIRECTIONS:
        raise DataError(f"direction must be one of {DIRECTIONS}")
    y, p = inst.y_values, inst.probs
    m, frac_low = _median_atom(p)
    pattern = np.empty(y.size)
    pattern[:m] = 1.0
    pattern[m + 1:] = -1.0
    pattern[m] = 2.0 * frac_low - 1.0
    if direction == "min":
        pattern = -pattern
    s_star = inst.s0 + inst.gamma * pattern
    objective = float(p @ (-s_star * y))
    mean_gap = abs(float(p @ s_star) - inst.s0)
    assert mean_gap <= 1e-10 * max(1.0, abs(inst.s0), inst.gamma), "mean constraint violated"
    return StratumSolution(
        s_star=s_star,
        objective=objective,
        split_point=float(y[m]),
        fractional_mass=frac_low,
    )


def closed_form_stratum(inst: StratumInstance, direction: str = "max") -> float:
    """Closed-form objective evaluated on the discrete distribution.

    Two-point {0, 1} instances use the exact binary form
    -s0 E[Y] +/- gamma * min(p1, 1 - p1); other instances use the
    median-threshold form -s0 E[Y] +/- gamma * E[Y sign(Y - M)] with M the
    mass-median atom.
    """
    if direction not in DIRECTIONS:
        raise DataError(f"direction must be one of {DIRECTIONS}")
    sign = 1.0 if direction == "max" else -1.0
    y, p = inst.y_values, inst.probs
    base = -inst.s0 * inst.mean_y
    if y.size == 2 and y[0] == 0.0 and y[1] == 1.0:
        corr = float(correction_binary_exact(p[1]))
    else:
        m, _ = _median_atom(p)
        corr = float(p @ (y * np.sign(y - y[m])))
    return base + sign * inst.gamma * corr


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a verification sweep: one row per check, JSON-line ready."""

    rows: tuple[dict, ...]
    passed: bool

    def failures(self) -> list[dict]:
        return [r for r in self.rows if not r["pass"]]


def _binary_instance(rng: np.random.Generator) -> StratumInstance:
    p1 = rng.uniform(0.01, 0.99)
    return StratumInstance(
        y_values=np.array([0.0, 1.0]),
        probs=np.array([1.0 - p1, p1]),
        s0=float(rng.normal()),
        gamma=float(rng.uniform(0.0, 2.0)),
    )


_CONTINUOUS_FAMILIES = ("normal", "student_t", "uniform", "mixture")


def _continuous_instance(rng: np.random.Generator, min_atoms: int, max_atoms: int) -> StratumInstance:
    """Discretize a median-zero continuous density onto a uniform grid.

    Cell masses come from CDF differences, so the mass-median atom is the one
    whose cell straddles zero; that keeps the LP-vs-closed-form gap within the
    atom tolerance gamma * (median atom mass) * (local spacing).
    """
    from scipy import stats

    family = _CONTINUOUS_FAMILIES[rng.integers(len(_CONTINUOUS_FAMILIES))]
    if family == "normal":
        dist = stats.norm(0.0, rng.uniform(0.5, 2.0))
    elif family == "student_t":
        dist = stats.t(df=rng.uniform(3.0, 8.0), scale=rng.uniform(0.5, 1.5))
    elif family == "uniform":
        half = rng.uniform(0.5, 3.0)
        dist = stats.uniform(-half, 2.0 * half)
    else:
        spread = rng.uniform(0.5, 2.0)
        comp = stats.norm(spread, 1.0)
        other = stats.norm(-spread, 1.0)

        class _Mix:
            def ppf(self, q):
                # Symmetric two-component mixture: median is exactly zero.
                lo, hi = -spread - 8.0, spread + 8.0
                qs = np.atleast_1d(np.asarray(q, dtype=float))
                out = np.empty_like(qs)
                for i, qq in enumerate(qs):
                    a, b = lo, hi
                    for _ in range(80):
                        mid = 0.5 * (a + b)
                        if self.cdf(mid) < qq:
                            a = mid
                        else:
                            b = mid
                    out[i] = 0.5 * (a + b)
                return out if out.size > 1 else float(out[0])

            def cdf(self, v):
                return 0.5 * comp.cdf(v) + 0.5 * other.cdf(v)

        dist = _Mix()
    n_atoms = int(rng.integers(min_atoms, max_atoms + 1))
    grid = np.linspace(dist.ppf(0.001), dist.ppf(0.999), n_atoms)
    h = grid[1] - grid[0]
    edges = np.concatenate([[grid[0] - 0.5 * h], grid + 0.5 * h])
    masses = np.diff(np.asarray(dist.cdf(edges), dtype=float))
    masses = np.maximum(masses, 0.0)
    masses /= masses.sum()
    # Exact renormalization so the simplex invariant holds to 1e-12.
    masses[-1] += 1.0 - masses.sum()
    return StratumInstance(
        y_values=grid,
        probs=masses,
        s0=float(rng.normal()),
        gamma=float(rng.uniform(0.0, 2.0)),
    )


def _local_spacing(y: np.ndarray, m: int) -> float:
    gaps = []
    if m > 0:
        gaps.append(y[m] - y[m - 1])
    if m + 1 < y.size:
        gaps.append(y[m + 1] - y[m])
    return float(max(gaps)) if gaps else 0.0


def verify_propositions(n_instances: int, seed: int, n_continuous: int | None = None,
                        min_atoms: int = 200, max_atoms: int = 500) -> VerificationReport:
    """Compare the LP solver against the closed forms on random instances.

    Binary instances must agree within 1e-9. Discretized-continuous instances
    are held to the atom tolerance gamma * (median-atom mass) * (local y
    spacing), since the closed form zeroes the whole median atom while the LP
    splits it fractionally. By default one continuous instance is generated
    per five binary ones.
    """
    if n_instances < 1:
        raise DataError("n_instances must be >= 1")
    if n_continuous is None:
        n_continuous = max(n_instances // 5, 1)
    rng = derive_rng(seed, MC_STREAM, 0)
    rows = []
    for i in range(n_instances):
        inst = _binary_instance(rng)
        gap = max(
            abs(solve_stratum(inst, d).objective - closed_form_stratum(inst, d))
            for d in DIRECTIONS
        )
        rows.append({
            "instance_id": i,
            "kind": "binary",
            "lp_value": solve_stratum(inst, "max").objective,
            "closed_form": closed_form_stratum(inst, "max"),
            "gap": gap,
            "tolerance": 1e-9,
            "pass": bool(gap <= 1e-9),
        })
    for i in range(n_continuous):
        inst = _continuous_instance(rng, min_atoms, max_atoms)
        m, _ = _median_atom(inst.probs)
        tol = inst.gamma * float(inst.probs[m]) * _local_spacing(inst.y_values, m)
        gap = max(
            abs(solve_stratum(inst, d).objective - closed_form_stratum(inst, d))
            for d in DIRECTIONS
        )
        rows.append({
            "instance_id": n_instances + i,
            "kind": "continuous",
            "lp_value": solve_stratum(inst, "max").objective,
            "closed_form": closed_form_stratum(inst, "max"),
            "gap": gap,
            "tolerance": tol,
            "pass": bool(gap <= tol),
        })
    return VerificationReport(rows=tuple(rows), passed=all(r["pass"] for r in rows))


def _default_shape(a, x):
    return np.exp(-0.5 * np.asarray(a, dtype=float) ** 2)


@dataclass(frozen=True)
class RosenbaumModel:
    """Exponential-tilt dose model f(a | x, u) = zeta(x, u) eta(a, x) exp(g a u).

    With u supported in [0, 1] this family satisfies the odds-ratio
    sensitivity model at gamma_r. Normalizers are computed by trapezoid
    quadrature over [quad_lo, quad_hi].
    """

    gamma_r: float
    u_grid: tuple[float, ...] = (0.0, 0.5, 1.0)
    p_u: tuple[float, ...] | None = None
    eta: Callable[[np.ndarray, np.ndarray], np.ndarray] = _default_shape
    quad_lo: float = -8.0
    quad_hi: float = 8.0
    n_quad: int = 2001

    def __post_init__(self):
        if self.gamma_r < 0:
            raise DataError("gamma_r must be >= 0")
        u = np.asarray(self.u_grid, dtype=float)
        if np.any(u < 0) or np.any(u > 1):
            raise DataError("u_grid must lie in [0, 1]")
        if self.p_u is None:
            object.__setattr__(self, "p_u", tuple(np.full(u.size, 1.0 / u.size)))
        p = np.asarray(self.p_u, dtype=float)
        if p.shape != u.shape or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DataError("p_u must be a probability vector matching u_grid")

    @property
    def quad_grid(self) -> np.ndarray:
        return np.linspace(self.quad_lo, self.quad_hi, self.n_quad)

    def normalizers(self, x) -> np.ndarray:
        """zeta(x, u) for each u on the grid, by trapezoid quadrature."""
        grid = self.quad_grid
        shape = np.asarray(self.eta(grid, x), dtype=float)
        out = np.empty(len(self.u_grid))
        for i, u in enumerate(self.u_grid):
            out[i] = 1.0 / np.trapezoid(shape * np.exp(self.gamma_r * grid * u), grid)
        return out

    def conditional_density(self, a, x, u_index: int, zetas: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        u = self.u_grid[u_index]
        return zetas[u_index] * np.asarray(self.eta(a, x), dtype=float) * np.exp(self.gamma_r * a * u)

    def marginal_density(self, a, x, zetas: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        for i, w in enumerate(self.p_u):
            out = out + w * self.conditional_density(a, x, i, zetas)
        return out


def _log_slope(f: Callable[[np.ndarray], np.ndarray], a: np.ndarray, h: float = 1e-4) -> np.ndarray:
    return (np.log(f(a + h)) - np.log(f(a - h))) / (2.0 * h)


def verify_model_implication(model: RosenbaumModel, a_grid=None, x_fixed=None) -> VerificationReport:
    """Numerically certify the sensitivity-model implications of the tilt model.

    Checks, at the given x: every f(a | x, u) integrates to one (the
    normalization precondition); the marginal odds-ratio bounds
    exp(+/- gamma_r |a - a'|) at every grid pair; the score-gap bound
    |s(a|x,u) - s(a|x)| <= gamma_r; and the integration identity
    E[s(A|X,U) | a, x] = s(a|x). The identity row only passes when the
    normalization precondition holds, since it is vacuously true for
    unnormalized mixtures.
    """
    if a_grid is None:
        a_grid = np.linspace(model.quad_lo + 2.0, model.quad_hi - 2.0, 41)
    a_grid = np.asarray(a_grid, dtype=float)
    x = np.zeros(1) if x_fixed is None else np.asarray(x_fixed, dtype=float)
    zetas = model.normalizers(x)
    rows = []

    grid = model.quad_grid
    norm_gap = 0.0
    for i in range(len(model.u_grid)):
        mass = float(np.trapezoid(model.conditional_density(grid, x, i, zetas), grid))
        norm_gap = max(norm_gap, abs(mass - 1.0))
    normalized = norm_gap <= 1e-8
    rows.append({
        "instance_id": 0,
        "kind": "density_normalization",
        "lp_value": 1.0 + norm_gap,
        "closed_form": 1.0,
        "gap": norm_gap,
        "tolerance": 1e-8,
        "pass": bool(normalized),
    })

    # Odds-ratio bounds of the marginal sensitivity model at every grid pair.
    log_f_u = np.stack([
        np.log(model.conditional_density(a_grid, x, i, zetas)) for i in range(len(model.u_grid))
    ])
    log_f = np.log(model.marginal_density(a_grid, x, zetas))
    worst = 0.0
    for i in range(len(model.u_grid)):
        r = log_f_u[i] - log_f  # log f(a|x,u) - log f(a|x)
        diff = np.abs(r[None, :] - r[:, None]) - model.gamma_r * np.abs(a_grid[None, :] - a_grid[:, None])
        worst = max(worst, float(diff.max()))
    rows.append({
        "instance_id": 1,
        "kind": "marginal_model_odds",
        "lp_value": worst,
        "closed_form": 0.0,
        "gap": max(worst, 0.0),
        "tolerance": 1e-8,
        "pass": bool(worst <= 1e-8),
    })

    # Score-gap bound and integration identity, via numerical differentiation.
    score_u = np.stack([
        _log_slope(lambda a, i=i: model.conditional_density(a, x, i, zetas), a_grid)
        for i in range(len(model.u_grid))
    ])
    score_marginal = _log_slope(lambda a: model.marginal_density(a, x, zetas), a_grid)
    gap_score = float(np.max(np.abs(score_u - score_marginal[None, :]))) - model.gamma_r
    rows.append({
        "instance_id": 2,
        "kind": "score_gap",
        "lp_value": model.gamma_r + max(gap_score, 0.0),
        "closed_form": model.gamma_r,
        "gap": max(gap_score, 0.0),
        "tolerance": 1e-6,
        "pass": bool(gap_score <= 1e-6),
    })

    dens_u = np.stack([
        model.conditional_density(a_grid, x, i, zetas) for i in range(len(model.u_grid))
    ])
    posterior = dens_u * np.asarray(model.p_u)[:, None]
    posterior /= posterior.sum(axis=0, keepdims=True)
    integrated = np.sum(posterior * score_u, axis=0)
    ident_gap = float(np.max(np.abs(integrated - score_marginal)))
    rows.append({
        "instance_id": 3,
        "kind": "score_integrates",
        "lp_value": ident_gap,
        "closed_form": 0.0,
        "gap": ident_gap,
        "tolerance": 1e-6,
        "pass": bool(ident_gap <= 1e-6 and normalized),
    })
    return VerificationReport(rows=tuple(rows), passed=all(r["pass"] for r in rows))


def ground_truth_ade(spec: DgpSpec, coeffs: DgpCoefficients, n_mc: int = 1_000_000,
                     seed=0) -> float:
    """Monte-Carlo truth: mean of the closed-form d/da E[Y | A, X, U] over draws."""
    value, _ = ground_truth_ade_detail(spec, coeffs, n_mc, seed)
    return value


def ground_truth_ade_detail(spec: DgpSpec, coeffs: DgpCoefficients, n_mc: int = 1_000_000,
                            seed=0) -> tuple[float, float]:
    """As ground_truth_ade, returning (estimate, Monte-Carlo standard error)."""
    if n_mc < 1:
        raise DataError("n_mc must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, MC_STREAM, 1)
    a, x, u, _ = draw_joint(spec, coeffs, n_mc, rng)
    deriv = latent_derivative(spec, coeffs, a, x, u)
    return float(np.mean(deriv)), float(np.std(deriv, ddof=1) / math.sqrt(n_mc))


def ade_via_score_mc(spec: DgpSpec, coeffs: DgpCoefficients, n_mc: int = 1_000_000,
                     seed=0) -> tuple[float, float]:
    """Monte-Carlo estimate of E[-s(A | X, U) Y] with its standard error.

    The negative latent score is the Riesz representer of the derivative
    functional, so this should match ground_truth_ade on the same model up to
    Monte-Carlo error.
    """
    if n_mc < 1:
        raise DataError("n_mc must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed, MC_STREAM, 2)
    a, x, u, _ = draw_joint(spec, coeffs, n_mc, rng)
    y = draw_outcome(spec, coeffs, a, x, u, rng)
    vals = -latent_dose_score(spec, coeffs, a, x, u) * y
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(n_mc))
