"""Evaluation statistics and result files: 2-D error, RMSE, percentiles,
empirical CDF, and the FCC 50 m / 80 % horizontal-accuracy check."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .geometry import Position

FCC_HORIZONTAL_LIMIT_M = 50.0

RESULTS_HEADER = ["strategy", "trial_id", "truth_x", "truth_y",
                  "est_x", "est_y", "error_m", "failed"]
SUMMARY_HEADER = ["strategy", "rmse_m", "p80_m", "n_trials", "n_failed", "fcc_pass"]
SUMMARY_SCHEMA_VERSION = 1


def rmse(errors: Sequence[float]) -> float:
    """Root of the mean squared error, meters."""
    if len(errors) == 0:
        raise ValueError("empty error list")
    return math.sqrt(sum(e * e for e in errors) / len(errors))


def percentile(errors: Sequence[float], q: float) -> float:
    """Nearest-rank percentile: the sorted value at 1-based index ceil(q*N)."""
    if len(errors) == 0:
        raise ValueError("empty error list")
    if not (0.0 < q <= 1.0):
        raise ValueError("q must be in (0, 1]")
    n = len(errors)
    # Tiny slack keeps ranks like 0.8*10 from drifting past an integer.
    rank = min(max(math.ceil(q * n - 1e-9), 1), n)
    return sorted(errors)[rank - 1]


def cdf_points(errors: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical CDF as (value, fraction <= value) step points, one per
    distinct value, nondecreasing and ending at 1.0."""
    if len(errors) == 0:
        raise ValueError("empty error list")
    ordered = sorted(errors)
    n = len(ordered)
    points = []
    for i, v in enumerate(ordered, start=1):
        if i == n or ordered[i] != v:
            points.append((v, i / n))
    return points


def fcc_horizontal_check(errors: Sequence[float]) -> bool:
    """True iff the 80th-percentile error is at most 50 m (inclusive)."""
    return percentile(errors, 0.8) <= FCC_HORIZONTAL_LIMIT_M


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    strategy: str
    truth: Position
    estimate: Position | None
    error_m: float | None
    failed: bool = False


@dataclass(frozen=True)
class StrategySummary:
    strategy: str
    rmse_m: float
    p80_m: float
    n_trials: int
    n_failed: int
    fcc_pass: bool


@dataclass
class EstimateReport:
    """All per-trial records of one experiment plus per-strategy aggregates.

    Failed trials are kept (and counted) but excluded from the aggregates.
    Aggregates do not depend on record order.
    """

    records: tuple[TrialRecord, ...] = field(default_factory=tuple)

    def strategies(self) -> tuple[str, ...]:
        return tuple(sorted({r.strategy for r in self.records}))

    def errors(self, strategy: str) -> list[float]:
        out = [r.error_m for r in sorted(self.records, key=lambda r: r.trial_id)
               if r.strategy == strategy and not r.failed]
        return [e for e in out if e is not None]

    def summary(self, strategy: str) -> StrategySummary:
        errors = self.errors(strategy)
        n_failed = sum(1 for r in self.records
                       if r.strategy == strategy and r.failed)
        if not errors:
            raise ValueError(f"no successful trials for strategy {strategy!r}")
        return StrategySummary(strategy=strategy, rmse_m=rmse(errors),
                               p80_m=percentile(errors, 0.8),
                               n_trials=len(errors) + n_failed,
                               n_failed=n_failed,
                               fcc_pass=fcc_horizontal_check(errors))

    def cdf(self, strategy: str) -> list[tuple[float, float]]:
        return cdf_points(self.errors(strategy))


# ---------------------------------------------------------------------------
# CSV files. Floats are written with repr() so reading them back is exact.


def write_results_csv(report: EstimateReport, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(RESULTS_HEADER)
        for r in sorted(report.records, key=lambda r: (r.strategy, r.trial_id)):
            est = r.estimate
            w.writerow([r.strategy, r.trial_id,
                        repr(r.truth.x), repr(r.truth.y),
                        "" if est is None else repr(est.x),
                        "" if est is None else repr(est.y),
                        "" if r.error_m is None else repr(r.error_m),
                        "true" if r.failed else "false"])


def read_results_csv(path: str | Path) -> EstimateReport:
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != RESULTS_HEADER:
            raise ValueError(f"{path}: unexpected results header")
        for row in reader:
            failed = row[7] == "true"
            est = None if row[4] == "" else Position(float(row[4]), float(row[5]))
            err = None if row[6] == "" else float(row[6])
            records.append(TrialRecord(int(row[1]), row[0],
                                       Position(float(row[2]), float(row[3])),
                                       est, err, failed))
    return EstimateReport(tuple(records))


def write_summary_csv(report: EstimateReport, path: str | Path,
                      scenario_name: str) -> None:
    """Summary rows per strategy, with a metadata comment line so comparison
    tooling can key rows by (scenario, strategy) and check schema versions."""
    with open(path, "w", newline="") as f:
        f.write(f"# rssloc-summary schema_version={SUMMARY_SCHEMA_VERSION} "
                f"scenario={scenario_name}\n")
        w = csv.writer(f)
        w.writerow(SUMMARY_HEADER)
        for strategy in report.strategies():
            s = report.summary(strategy)
            w.writerow([s.strategy, repr(s.rmse_m), repr(s.p80_m),
                        s.n_trials, s.n_failed,
                        "true" if s.fcc_pass else "false"])


def read_summary_csv(path: str | Path) -> tuple[str, list[StrategySummary]]:
    """Parse a summary file; returns (scenario name, rows)."""
    path = Path(path)
    with open(path, newline="") as f:
        meta = f.readline().strip().split()
        if len(meta) < 2 or meta[0] != "#" or meta[1] != "rssloc-summary":
            raise ValueError(f"{path}: missing rssloc-summary metadata line")
        fields = dict(p.split("=", 1) for p in meta[2:] if "=" in p)
        version = fields.get("schema_version")
        scenario = fields.get("scenario")
        if version != str(SUMMARY_SCHEMA_VERSION):
            raise ValueError(
                f"{path}: unsupported summary schema_version {version!r}")
        if not scenario:
            raise ValueError(f"{path}: metadata line lacks scenario name")
        reader = csv.reader(f)
        header = next(reader, None)
        if header != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected summary header")
        rows = [StrategySummary(r[0], float(r[1]), float(r[2]),
                                int(r[3]), int(r[4]), r[5] == "true")
                for r in reader]
    return scenario, rows


def write_cdf_csv(report: EstimateReport, strategy: str, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["error_m", "fraction"])
        for value, fraction in report.cdf(strategy):
            w.writerow([repr(value), repr(fraction)])
