"""Command-line entry point.

Subcommands: ``sample``, ``solve``, ``risk``, ``bound``, ``verify``,
``sweep``.  Every command is a pure function of its arguments and config
file contents; the seed defaults to the documented constant 1729, so runs
are deterministic unless a seed is supplied.  Exit codes: 0 success, 1
domain or solver errors, 2 configuration/IO/usage errors.  Numeric output
uses shortest round-trip formatting, lossless at 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import BmlError
from .experiments import (
    SweepConfig,
    aggregate_to_csv,
    load_sweep_config,
    records_to_csv,
    run_sweep,
    write_plot_script,
)
from .model import MixtureModel, model_from_dict, model_to_dict, read_document
from .risk import (
    build_risk_report,
    check_assumptions,
    concentration_bound_checks,
    isotropic_upper_bound,
    risk_lower_bound,
    risk_upper_bound,
)
from .sampling import dataset_to_csv, sample_dataset
from .solvers import (
    gram_matrix,
    hard_margin_svm,
    min_norm_interpolator,
    sv_proliferation_predicate,
)
from .streams import DEFAULT_SEED, trial_seed


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="model spec file (.toml or .json)")
    p.add_argument("--d", type=int, help="dimension (inline model)")
    p.add_argument("--alpha", type=float, help="polynomial spectrum decay exponent")
    p.add_argument(
        "--isotropic", action="store_true", help="identity covariance (alpha = 0)"
    )
    p.add_argument("--rotation-seed", type=int, help="seeded random rotation")
    p.add_argument("--mu-norm", type=float, help="mean norm (sphere draw by default)")
    p.add_argument(
        "--mu-eigvec", type=int, metavar="K", help="align the mean with eigenvector K"
    )
    p.add_argument(
        "--rare-weak",
        nargs=2,
        type=float,
        metavar=("S", "GAMMA"),
        help="sparse mean: S entries equal to GAMMA",
    )
    p.add_argument(
        "--entry-dist", choices=("gaussian", "rademacher", "uniform"), default=None
    )


def _model_from_args(args) -> MixtureModel:
    doc: dict = read_document(args.model) if args.model else {}
    if args.d is not None:
        doc["d"] = args.d
    if args.isotropic:
        doc["spectrum"] = {"kind": "polynomial", "alpha": 0.0}
    if args.alpha is not None:
        doc["spectrum"] = {"kind": "polynomial", "alpha": args.alpha}
    if args.rotation_seed is not None:
        doc.setdefault("spectrum", {"kind": "polynomial", "alpha": 0.0})
        doc["spectrum"]["rotation_seed"] = args.rotation_seed
    if args.rare_weak is not None:
        s, gamma = args.rare_weak
        doc["mean"] = {"kind": "rare_weak", "s": int(s), "gamma": gamma}
    elif args.mu_eigvec is not None:
        if args.mu_norm is None:
            raise BmlError("--mu-eigvec needs --mu-norm for the mean norm")
        doc["mean"] = {"kind": "eigvec", "k": args.mu_eigvec, "r": args.mu_norm}
    elif args.mu_norm is not None:
        doc["mean"] = {"kind": "sphere", "r": args.mu_norm}
    if args.entry_dist is not None:
        doc["entry_dist"] = args.entry_dist
    doc.setdefault("seed", getattr(args, "seed", DEFAULT_SEED))
    if "d" not in doc:
        raise FileNotFoundError("no model given: pass --model FILE or --d with flags")
    # inline defaults: identity covariance, zero mean
    doc.setdefault("spectrum", {"kind": "polynomial", "alpha": 0.0})
    doc.setdefault("mean", {"kind": "sphere", "r": 0.0})
    return model_from_dict(doc)


def _json(obj) -> str:
    return json.dumps(obj)


def _cmd_sample(args) -> int:
    model = _model_from_args(args)
    data = sample_dataset(model, args.n, args.seed)
    if args.format == "json":
        payload = {
            "model": model_to_dict(model),
            "seed": args.seed,
            "y": data.y.tolist(),
            "X": data.X.tolist(),
        }
        _emit(_json(payload), args.output)
    else:
        if not args.output:
            raise FileNotFoundError("csv sample output needs --output PATH")
        dataset_to_csv(data, args.output)
    return 0


def _cmd_solve(args) -> int:
    model = _model_from_args(args)
    data = sample_dataset(model, args.n, args.seed)
    G = gram_matrix(data)
    lines = []
    interp = min_norm_interpolator(data, gram=G)
    margins = interp.margins(data)
    lines.append(
        _json(
            {
                "solver": "interpolator",
                "norm": interp.norm,
                "residual": interp.diagnostics["residual"],
                "min_margin": float(margins.min()),
                "max_margin": float(margins.max()),
            }
        )
    )
    svm = hard_margin_svm(data, tol=args.tol, max_iter=args.max_iter, gram=G)
    margins = svm.margins(data)
    lines.append(
        _json(
            {
                "solver": "svm",
                "norm": svm.norm,
                "gap": svm.diagnostics["gap"],
                "sweeps": svm.diagnostics["sweeps"],
                "support_size": svm.diagnostics["support_size"],
                "min_margin": float(margins.min()),
                "max_margin": float(margins.max()),
            }
        )
    )
    verdict = sv_proliferation_predicate(data, gram=G)
    lines.append(
        _json(
            {
                "predicate": verdict.verdict,
                "min_criterion": verdict.min_value,
                "tau": verdict.tau,
            }
        )
    )
    _emit("\n".join(lines), args.output)
    return 0


def _cmd_risk(args) -> int:
    model = _model_from_args(args)
    data = sample_dataset(model, args.n, args.seed)
    G = gram_matrix(data)
    if args.solver == "interpolator":
        clf = min_norm_interpolator(data, gram=G)
    elif args.solver == "svm":
        clf = hard_margin_svm(data, gram=G)
    else:
        verdict = sv_proliferation_predicate(data, gram=G)
        if verdict.verdict == "equal":
            clf = min_norm_interpolator(data, gram=G)
        else:
            clf = hard_margin_svm(data, gram=G)
    report = build_risk_report(
        clf,
        model,
        args.n,
        c=args.c,
        c_prime=args.cprime,
        c_dprime=args.cdprime,
        mc_samples=args.mc_samples,
        seed=args.seed,
    )
    payload = report.to_dict()
    payload["n"] = args.n
    payload["seed"] = args.seed
    payload["model"] = model_to_dict(model)
    _emit(_json(payload), args.output)
    return 0


def _cmd_bound(args) -> int:
    if args.isotropic and args.model is None and args.mu_norm is not None:
        if args.d is None:
            raise FileNotFoundError("isotropic bound needs --d")
        up = isotropic_upper_bound(args.n, args.d, args.mu_norm, args.cprime)
        payload = {
            "form": "isotropic",
            "n": args.n,
            "d": args.d,
            "mu_norm": args.mu_norm,
            "exponent": up.exponent,
            "bound": up.bound,
            "c_prime": up.c_prime,
        }
        _emit(_json(payload), args.output)
        return 0
    model = _model_from_args(args)
    up = risk_upper_bound(args.n, model, args.cprime)
    lower = (
        risk_lower_bound(args.n, model, args.c, args.cprime, args.cdprime)
        if model.entry_dist == "gaussian"
        else None
    )
    verdict = check_assumptions(args.n, model, args.c)
    payload = {
        "form": "general",
        "n": args.n,
        "exponent": up.exponent,
        "bound": up.bound,
        "c_prime": up.c_prime,
        "lower_case": lower.case if lower else None,
        "lower_exponent": lower.exponent if lower else None,
        "lower_bound": lower.bound if lower else None,
        "assumptions_satisfied": verdict.satisfied,
        "assumption_ratios": {c.name: c.ratio for c in verdict.conditions},
        "model": model_to_dict(model),
    }
    _emit(_json(payload), args.output)
    return 0


def _cmd_verify(args) -> int:
    model = _model_from_args(args)
    names: list[str] = []
    passes: dict[str, int] = {}
    for t in range(args.trials):
        data = sample_dataset(model, args.n, trial_seed(args.seed, t))
        report = concentration_bound_checks(
            data, polarization_constant=args.polarization_constant
        )
        for check in report.checks:
            if check.name not in passes:
                names.append(check.name)
                passes[check.name] = 0
            passes[check.name] += int(check.holds)
    if args.format == "json":
        payload = {
            "trials": args.trials,
            "n": args.n,
            "rates": {name: passes[name] / args.trials for name in names},
            "passes": passes,
        }
        _emit(_json(payload), args.output)
    elif args.format == "csv":
        rows = ["check,passes,trials,rate"]
        for name in names:
            rows.append(f"{name},{passes[name]},{args.trials},{passes[name] / args.trials!r}")
        _emit("\n".join(rows), args.output)
    else:
        width = max(len(name) for name in names)
        rows = [f"{'check'.ljust(width)}  passes  trials  rate"]
        for name in names:
            rate = passes[name] / args.trials
            rows.append(
                f"{name.ljust(width)}  {passes[name]:6d}  {args.trials:6d}  {rate:.3f}"
            )
        _emit("\n".join(rows), args.output)
    return 0


def _cmd_sweep(args) -> int:
    config = load_sweep_config(args.config)
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed_override is not None:
        overrides["seed"] = args.seed_override
    if overrides:
        doc = config.to_dict()
        doc.update(overrides)
        config = SweepConfig.from_dict(doc)
    result = run_sweep(config, threads=args.threads)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.csv"
    aggregate_path = out_dir / "aggregate.csv"
    records_to_csv(result.records, records_path)
    aggregate_to_csv(result.cells, aggregate_path)
    write_plot_script(aggregate_path, out_dir / "plot.gp", config)
    # resolved config echoed next to the outputs for provenance
    (out_dir / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8"
    )
    failed = [
        {"alpha": c.alpha, "d": c.d, "n": c.n, "r": c.r}
        for c in result.cells
        if c.failed
    ]
    summary = {
        "config": config.to_dict(),
        "cells": len(result.cells),
        "records": len(result.records),
        "failed_cells": failed,
        "records_csv": str(records_path),
        "aggregate_csv": str(aggregate_path),
    }
    _emit(_json(summary), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bml",
        description=(
            "Max-margin classification on sub-Gaussian mixtures: sampling, "
            "solvers, population risk, bound checks and sweeps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        _add_model_flags(p)
        p.add_argument(
            "--seed",
            type=int,
            default=DEFAULT_SEED,
            help=f"base seed (default {DEFAULT_SEED}; runs are deterministic)",
        )
        p.add_argument("--output", help="write to this file instead of stdout")

    p = sub.add_parser("sample", help="draw a dataset and dump it")
    common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=_cmd_sample)

    # solve, risk and bound emit JSON by contract
    p = sub.add_parser("solve", help="run both solvers plus the predicate")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("risk", help="risk report for a solved classifier")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument(
        "--solver", choices=("auto", "svm", "interpolator"), default="auto"
    )
    p.add_argument("--mc-samples", type=int, default=None)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--cprime", type=float, default=1.0)
    p.add_argument("--cdprime", type=float, default=1.0)
    p.set_defaults(func=_cmd_risk)

    p = sub.add_parser("bound", help="bound evaluators without data")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--cprime", type=float, default=1.0)
    p.add_argument("--cdprime", type=float, default=1.0)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("verify", help="concentration pass rates over trials")
    common(p)
    # default output is a plain pass-rate table
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--polarization-constant", type=float, default=5.0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("sweep", help="run a sweep config and emit CSVs")
    p.add_argument("--config", required=True, help="sweep config (.toml or .json)")
    p.add_argument("--output-dir", default="sweep_out")
    p.add_argument("--trials", type=int, default=None, help="override config trials")
    p.add_argument(
        "--seed", dest="seed_override", type=int, default=None, help="override seed"
    )
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", help="write the summary JSON to this file")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except BmlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
