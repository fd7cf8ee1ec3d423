"""Command-line driver: build fingerprint maps, run experiments, compare runs.

All commands are deterministic given their inputs and the seed; the seed is
taken from --seed, then the RSSLOC_SEED environment variable, then the
scenario file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import metrics
from .estimators import STRATEGIES
from .fingerprint import read_map_csv, write_map_csv
from .scenario import (build_fingerprint_from_scenario, load_scenario,
                       map_build_rng, run_experiment)

COMPARE_HEADER = ["scenario", "strategy", "rmse_m", "p80_m",
                  "n_trials", "n_failed", "fcc_pass"]


def _resolve_seed(args_seed: int | None, scenario_seed: int) -> int:
    if args_seed is not None:
        return args_seed
    env = os.environ.get("RSSLOC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"RSSLOC_SEED must be an integer, got {env!r}") from None
    return scenario_seed


def _parse_strategies(arg: str) -> tuple[str, ...]:
    names = tuple(sorted({p.strip() for p in arg.split(",") if p.strip()}))
    unknown = set(names) - set(STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies: {sorted(unknown)} "
                         f"(choose from {','.join(STRATEGIES)})")
    if not names:
        raise ValueError("no strategies given")
    return names


def cmd_build_map(args: argparse.Namespace) -> int:
    s = load_scenario(args.scenario)
    s = replace(s, seed=_resolve_seed(args.seed, s.seed))
    if not s.fingerprint_grid:
        raise ValueError(f"scenario {s.name!r} has no fingerprint_grid")
    draws = args.draws if args.draws is not None else s.map_draws_per_point
    fmap = build_fingerprint_from_scenario(s, draws, map_build_rng(s))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_map_csv(fmap, out)
    print(f"wrote {len(fmap)}-entry map to {out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    s = load_scenario(args.scenario)
    s = replace(s, seed=_resolve_seed(args.seed, s.seed))
    if args.grid_res is not None:
        s = replace(s, grid_resolution=args.grid_res)
    strategies = _parse_strategies(args.strategies)
    fmap = None
    if "fp" in strategies:
        if args.map is None:
            raise ValueError("strategy 'fp' requires --map")
        fmap = read_map_csv(args.map)

    report = run_experiment(s, strategies, fmap=fmap, jobs=args.jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_results_csv(report, out / "results.csv")
    metrics.write_summary_csv(report, out / "summary.csv", s.name)
    for strategy in report.strategies():
        metrics.write_cdf_csv(report, strategy, out / f"cdf_{strategy}.csv")
    for strategy in report.strategies():
        summ = report.summary(strategy)
        print(f"{s.name} {strategy}: rmse={summ.rmse_m:.2f} m "
              f"p80={summ.p80_m:.2f} m trials={summ.n_trials} "
              f"failed={summ.n_failed} fcc={'pass' if summ.fcc_pass else 'fail'}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    rows = []
    for path in args.summaries:
        scenario, summaries = metrics.read_summary_csv(path)
        for s in summaries:
            rows.append((scenario, s))
    rows.sort(key=lambda r: (r[0], r[1].strategy))

    table = [COMPARE_HEADER]
    for scenario, s in rows:
        table.append([scenario, s.strategy, f"{s.rmse_m:.2f}", f"{s.p80_m:.2f}",
                      str(s.n_trials), str(s.n_failed),
                      "true" if s.fcc_pass else "false"])
    widths = [max(len(row[i]) for row in table) for i in range(len(COMPARE_HEADER))]
    for row in table:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())

    if args.out is not None:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(COMPARE_HEADER)
            for scenario, s in rows:
                w.writerow([scenario, s.strategy, repr(s.rmse_m), repr(s.p80_m),
                            s.n_trials, s.n_failed, "true" if s.fcc_pass else "false"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rssloc",
        description="RSS target localization: MLE with rand/SDP/fingerprint init.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-map", help="offline phase: build a fingerprint map")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--draws", type=int, default=None,
                   help="DL samples averaged per map point (default: scenario value)")
    p.add_argument("--out", required=True, help="output map CSV path")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("run", help="run the Monte Carlo experiment")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--map", default=None, help="fingerprint map CSV (needed for fp)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--strategies", default="rand,sdp,fp",
                   help="comma-separated subset of rand,sdp,fp")
    p.add_argument("--seed", type=int, default=None, help="seed override")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--grid-res", type=float, default=None,
                   help="grid resolution override, meters")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="merge summary files into one table")
    p.add_argument("summaries", nargs="+", help="summary CSV files")
    p.add_argument("--out", default=None, help="also write the table as CSV")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
