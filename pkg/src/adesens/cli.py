"""Command-line entry point.

Subcommands: analyze (sensitivity curve for a CSV dataset), simulate
(coverage experiment), verify-bounds (optimization oracle sweep),
verify-model (sensitivity-model implications of the tilt dose model), and
ground-truth (Monte-Carlo truth for a synthetic DGP). Outputs are JSON/CSV
plot data; identical invocations with identical seeds produce byte-identical
files.

Exit codes: 0 success, 2 usage/configuration error, 3 data or numerical
error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .data import GammaGrid, RunConfig, load_config, load_csv
from .dgp import DgpCoefficients, DgpSpec, draw_coefficients
from .data import DGP_STREAM, derive_rng
from .errors import ConfigError, DataError, NumericalError
from .inference import SensitivityCurve, analyze
from .oracle import RosenbaumModel, VerificationReport, ground_truth_ade_detail, verify_model_implication, verify_propositions
from .simulate import DEFAULT_GAMMAS, coverage_experiment, emit_table

USAGE_ERROR, DATA_ERROR, VERIFY_ERROR = 2, 3, 4


def _curve_csv(curve: SensitivityCurve) -> str:
    lines = ["gamma,psi_min,psi_max,ci_lower,ci_upper,sim_lower,sim_upper"]
    for row in curve.to_dict()["grid"]:
        lines.append(",".join(
            format(row[k], ".17g")
            for k in ("gamma", "psi_min", "psi_max", "ci_lower", "ci_upper", "sim_lower", "sim_upper")
        ))
    return "\n".join(lines) + "\n"


def _report_jsonl(report: VerificationReport) -> str:
    return "".join(json.dumps(row) + "\n" for row in report.rows)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _cmd_analyze(args) -> int:
    overrides = {"outcome_type": args.outcome, "seed": args.seed, "alpha": args.alpha}
    if args.config is not None:
        config = load_config(args.config, **overrides)
    else:
        config = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
    dataset = load_csv(args.data, config.outcome_type)
    grid = GammaGrid(args.gamma_min, args.gamma_max, args.points)
    curve = analyze(dataset, config, grid, reference=args.reference)
    payload = json.dumps(curve.to_dict(), indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(payload)
    else:
        Path(str(args.out) + ".json").write_text(payload, encoding="utf-8")
        Path(str(args.out) + ".csv").write_text(_curve_csv(curve), encoding="utf-8")
    return 0


def _cmd_simulate(args) -> int:
    spec = DgpSpec(dose_family=args.dose, outcome_type=args.outcome,
                   delta=args.delta, zeta=args.zeta)
    gammas = [float(g) for g in args.gammas.split(",")] if args.gammas else list(DEFAULT_GAMMAS)
    config = RunConfig(outcome_type=args.outcome, seed=args.seed)
    report = coverage_experiment(spec, args.n, args.reps, gammas, config,
                                 truth_n_mc=args.truth_mc)
    text, csv_text = emit_table(report)
    sys.stdout.write(text)
    if report.n_failed:
        sys.stderr.write(f"warning: {report.n_failed} replications failed\n")
    if args.out is not None:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_verify_bounds(args) -> int:
    report = verify_propositions(args.instances, args.seed)
    _write(args.out, _report_jsonl(report))
    if not report.passed:
        sys.stderr.write(f"verification FAILED: {len(report.failures())} failing instances\n")
        return VERIFY_ERROR
    return 0


def _cmd_verify_model(args) -> int:
    model = RosenbaumModel(gamma_r=args.gamma_r)
    report = verify_model_implication(model)
    _write(args.out, _report_jsonl(report))
    if not report.passed:
        failing = ", ".join(r["kind"] for r in report.failures())
        sys.stderr.write(f"verification FAILED: {failing}\n")
        return VERIFY_ERROR
    return 0


def _cmd_ground_truth(args) -> int:
    spec = DgpSpec(dose_family=args.dose, outcome_type=args.outcome,
                   delta=args.delta, zeta=args.zeta)
    rng = derive_rng(args.seed, DGP_STREAM)
    coeffs = draw_coefficients(spec, rng)
    value, se = ground_truth_ade_detail(spec, coeffs, args.n_mc, rng)
    payload = {
        "ade": value,
        "mc_se": se,
        "n_mc": args.n_mc,
        "coefficients": {
            "theta": list(coeffs.theta),
            "beta": list(coeffs.beta),
            "eta_ax": list(coeffs.eta_ax),
        },
    }
    _write(args.out, json.dumps(payload, indent=2) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adesens",
        description="Sensitivity bounds for average derivative effects of continuous exposures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="sensitivity curve for a CSV dataset")
    p.add_argument("--data", required=True, help="CSV file with columns y, a, x1..xd")
    p.add_argument("--outcome", choices=("continuous", "binary"), default=None)
    p.add_argument("--config", default=None, help="key=value run configuration file")
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--gamma-max", type=float, default=math.log(2.0))
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--reference", type=float, default=0.0,
                   help="reference value for crossing computation (default 0)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", default=None, help="output prefix for .json and .csv")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="coverage experiment on a synthetic DGP")
    p.add_argument("--dose", choices=("gaussian", "gamma"), default="gaussian")
    p.add_argument("--outcome", choices=("continuous", "binary"), default="continuous")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--zeta", type=float, default=math.log(2.0))
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--gammas", default=None, help="comma-separated gamma values")
    p.add_argument("--truth-mc", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify-bounds", help="stratum optimization oracle sweep")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="JSON-lines output path")
    p.set_defaults(func=_cmd_verify_bounds)

    p = sub.add_parser("verify-model", help="sensitivity-model implication checks")
    p.add_argument("--gamma-r", type=float, default=math.log(2.0))
    p.add_argument("--out", default=None, help="JSON-lines output path")
    p.set_defaults(func=_cmd_verify_model)

    p = sub.add_parser("ground-truth", help="Monte-Carlo truth for a synthetic DGP")
    p.add_argument("--dose", choices=("gaussian", "gamma"), default="gaussian")
    p.add_argument("--outcome", choices=("continuous", "binary"), default="continuous")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--zeta", type=float, default=math.log(2.0))
    p.add_argument("--n-mc", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ground_truth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_ERROR
    except (DataError, NumericalError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
