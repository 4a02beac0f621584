"""Command-line entry point: ``riskbandit run | report | validate``.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. All
randomness flows from the config's master seed (or ``--seed``); there are
no wall-clock or entropy sources, so identical invocations produce
byte-identical report files for any ``--threads`` value.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import ConfigError, RiskBanditError
from .harness import run_experiment, write_reports

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskbandit",
        description="Risk-aware batch bandit campaigns: run experiments, "
        "summarize report tables, validate configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a campaign and write report tables")
    run_p.add_argument("--config", required=True, help="experiment config (JSON)")
    run_p.add_argument("--replications", type=int, help="override config replications")
    run_p.add_argument("--seed", type=int, help="override config master seed")
    run_p.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    run_p.add_argument("--out", help="override config output directory")

    report_p = sub.add_parser("report", help="summarize emitted report tables")
    report_p.add_argument("--in", dest="in_dir", required=True, help="directory with report tables")
    report_p.add_argument(
        "--metric",
        required=True,
        choices=("cvar", "regret", "proportions", "individual"),
    )
    report_p.add_argument("--at", type=int, help="horizon to report (default: all / final)")
    report_p.add_argument("--cohort", help="cohort id filter (proportions only)")

    val_p = sub.add_parser("validate", help="validate a config file")
    val_p.add_argument("--config", required=True, help="experiment config (JSON)")
    return parser


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    cohorts = ", ".join(
        f"{c.cohort_id} ({c.proportion:g}, K={c.n_arms})" for c in config.cohorts
    )
    print(
        f"ok: {config.strategy.label}, alpha={config.alpha:g}, T={config.horizon}, "
        f"R={config.replications}, population={config.population_total} [{cohorts}], "
        f"volunteers {config.volunteers_min}..{config.volunteers_max}"
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = load_config(args.config)
        overrides = {}
        if args.replications is not None:
            overrides["replications"] = args.replications
        if args.seed is not None:
            overrides["master_seed"] = args.seed
        if args.out is not None:
            overrides["output_dir"] = args.out
        if overrides:
            config = dataclasses.replace(config, **overrides)
        if config.output_dir is None:
            raise ConfigError("no output directory: set output_dir in the config or pass --out")
        if args.threads is not None and args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        result = run_experiment(config, workers=args.threads or 1)
        files = write_reports(result, config.output_dir)
    except RiskBanditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"{result.label}: final pooled CVaR_{config.alpha:g} = "
        f"{result.final_pooled_cvar:.9g}, final mean regret = "
        f"{result.final_mean_regret:.9g} (T={config.horizon}, R={config.replications})"
    )
    print(f"wrote {len(files)} report files to {config.output_dir}")
    return 0


def _read_table(in_dir: Path, name: str) -> list[dict[str, str]]:
    path = in_dir / name
    if not path.exists():
        raise RiskBanditError(f"missing report table: {path}")
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _print_rows(header: list[str], rows: list[list[str]]) -> None:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)))


def _cmd_report(args: argparse.Namespace) -> int:
    in_dir = Path(args.in_dir)
    try:
        if args.metric == "cvar":
            rows = _read_table(in_dir, "cvar_curve.csv")
            if args.at is not None:
                rows = [r for r in rows if int(r["T"]) == args.at]
            _print_rows(
                ["strategy", "T", "pooled_cvar", "ci_lo", "ci_hi"],
                [[r["strategy"], r["T"], r["pooled_cvar"], r["ci_lo"], r["ci_hi"]] for r in rows],
            )
        elif args.metric == "regret":
            rows = _read_table(in_dir, "regret_curve.csv")
            if args.at is not None:
                rows = [r for r in rows if int(r["T"]) == args.at]
            _print_rows(
                ["strategy", "T", "mean_regret", "q10", "q90"],
                [[r["strategy"], r["T"], r["mean_regret"], r["q10"], r["q90"]] for r in rows],
            )
        elif args.metric == "proportions":
            rows = _read_table(in_dir, "proportions.csv")
            if args.cohort is not None:
                rows = [r for r in rows if r["cohort"] == args.cohort]
            horizon = args.at if args.at is not None else max(
                (int(r["T"]) for r in rows), default=0
            )
            rows = [r for r in rows if int(r["T"]) == horizon]
            _print_rows(
                ["cohort", "arm", "T", "proportion"],
                [[r["cohort"], r["arm"], r["T"], r["proportion"]] for r in rows],
            )
        else:  # individual
            rows = _read_table(in_dir, "individual_regret.csv")
            if args.at is not None:
                rows = [r for r in rows if int(r["T"]) == args.at]
            values = sorted(float(r["farmer_regret"]) for r in rows)
            if not values:
                print("no individual regrets recorded")
                return 0
            arr = np.asarray(values)
            label = rows[0]["strategy"]
            _print_rows(
                ["strategy", "n", "mean", "p50", "p90", "p99", "max"],
                [[
                    label,
                    str(arr.size),
                    f"{arr.mean():.9g}",
                    f"{np.quantile(arr, 0.5):.9g}",
                    f"{np.quantile(arr, 0.9):.9g}",
                    f"{np.quantile(arr, 0.99):.9g}",
                    f"{arr.max():.9g}",
                ]],
            )
    except RiskBanditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, ValueError) as exc:
        print(f"error: malformed report table in {in_dir}: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "report":
        return _cmd_report(args)
    return _cmd_validate(args)


if __name__ == "__main__":
    sys.exit(main())
