"""Coverage experiments over the synthetic DGPs and their tabular summaries."""

from __future__ import annotations

import dataclasses
import io
import math
import time
from dataclasses import dataclass

import numpy as np

from .data import DGP_STREAM, MC_STREAM, RunConfig, derive_rng
from .dgp import DgpSpec, analytic_ade, draw_dataset
from .errors import AdeSensError, ConfigError, DataError
from .inference import cross_fitted_eif, estimate_bounds
from .oracle import ground_truth_ade

DEFAULT_GAMMAS = tuple(f * math.log(2.0) for f in (0.0, 0.25, 0.5, 0.75, 1.0))


@dataclass(frozen=True)
class CoverageCell:
    """Aggregate result for one (dgp, gamma) cell."""

    dose: str
    outcome: str
    delta: float
    gamma: float
    reps: int
    coverage: float
    mean_width: float
    mean_runtime: float


@dataclass(frozen=True)
class CoverageReport:
    """Coverage proportions per gamma, plus any failed replications."""

    cells: tuple[CoverageCell, ...]
    failures: tuple[tuple[int, str], ...] = ()

    @property
    def n_failed(self) -> int:
        return len(self.failures)


def _rep_seed(master_seed: int, rep: int, lane: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(DGP_STREAM, rep, lane))
    return int(ss.generate_state(1)[0])


def coverage_experiment(spec: DgpSpec, n: int, reps: int, gammas, config: RunConfig,
                        truth_n_mc: int = 1_000_000) -> CoverageReport:
    """Replicate draw -> truth -> cross-fitted interval, and record coverage.

    Every replication redraws the DGP coefficients and data, computes the true
    average derivative effect conditional on those coefficients (closed form
    for continuous outcomes, Monte Carlo for probit ones), and checks whether
    [ci_lower(gamma), ci_upper(gamma)] covers it at each requested gamma.
    Replications that fail are reported, never silently dropped. Results
    depend only on (spec, n, replication index, config.seed).
    """
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    if spec.outcome_type != config.outcome_type:
        raise ConfigError("DGP outcome_type does not match the run configuration")
    gammas = [float(g) for g in gammas]
    if not gammas or any(g < 0 for g in gammas):
        raise ConfigError("gammas must be a nonempty list of values >= 0")

    covered = np.zeros(len(gammas))
    widths = np.zeros(len(gammas))
    runtimes = []
    failures = []
    n_ok = 0
    for rep in range(reps):
        started = time.perf_counter()
        try:
            data_rng = derive_rng(config.seed, DGP_STREAM, rep)
            dataset, ctx = draw_dataset(spec, n, data_rng)
            if spec.outcome_type == "continuous":
                truth = analytic_ade(spec, ctx.coeffs)
            else:
                truth_rng = derive_rng(config.seed, MC_STREAM, rep)
                truth = ground_truth_ade(spec, ctx.coeffs, truth_n_mc, truth_rng)
            rep_config = dataclasses.replace(config, seed=_rep_seed(config.seed, rep, 0))
            eif = cross_fitted_eif(dataset, rep_config)
            for j, g in enumerate(gammas):
                est = estimate_bounds(eif, g, config.alpha)
                covered[j] += float(est.ci_lower <= truth <= est.ci_upper)
                widths[j] += est.ci_upper - est.ci_lower
        except AdeSensError as exc:
            failures.append((rep, str(exc)))
            continue
        n_ok += 1
        runtimes.append(time.perf_counter() - started)

    if n_ok == 0:
        raise DataError(f"all {reps} replications failed; first error: {failures[0][1]}")
    mean_runtime = float(np.mean(runtimes))
    cells = tuple(
        CoverageCell(
            dose=spec.dose_family,
            outcome=spec.outcome_type,
            delta=spec.delta,
            gamma=g,
            reps=n_ok,
            coverage=float(covered[j] / n_ok),
            mean_width=float(widths[j] / n_ok),
            mean_runtime=mean_runtime,
        )
        for j, g in enumerate(gammas)
    )
    return CoverageReport(cells=cells, failures=tuple(failures))


def emit_table(report: CoverageReport) -> tuple[str, str]:
    """Render a coverage report as (text table, CSV).

    Rows are (dose, outcome, delta); columns are the gamma values. The CSV is
    long-form with columns dose,outcome,delta,gamma,coverage,reps,mean_width.
    Runtime is intentionally excluded so outputs are byte-reproducible.
    """
    if not report.cells:
        raise DataError("empty coverage report")
    gammas = sorted({c.gamma for c in report.cells})
    rows = sorted({(c.dose, c.outcome, c.delta) for c in report.cells})
    by_key = {(c.dose, c.outcome, c.delta, c.gamma): c for c in report.cells}

    header = ["dose", "outcome", "delta"] + [f"g={g:.4f}" for g in gammas]
    widths = [max(10, len(h) + 2) for h in header]
    lines = ["".join(h.ljust(w) for h, w in zip(header, widths))]
    for dose, outcome, delta in rows:
        cells = [dose, outcome, f"{delta:g}"]
        for g in gammas:
            cell = by_key.get((dose, outcome, delta, g))
            cells.append("-" if cell is None else f"{cell.coverage:.2f}")
        lines.append("".join(c.ljust(w) for c, w in zip(cells, widths)))
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    buf.write("dose,outcome,delta,gamma,coverage,reps,mean_width\n")
    for dose, outcome, delta in rows:
        for g in gammas:
            cell = by_key.get((dose, outcome, delta, g))
            if cell is None:
                continue
            buf.write(
                f"{dose},{outcome},{delta:.17g},{g:.17g},{cell.coverage:.17g},"
                f"{cell.reps},{cell.mean_width:.17g}\n"
            )
    return text, buf.getvalue()
