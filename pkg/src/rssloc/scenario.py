"""Experiment environments and the Monte Carlo driver.

A Scenario bundles geometry (bounds, receivers, base stations, targets),
channel parameters, fingerprint collection points, and estimator knobs.
Random streams are derived from (seed, purpose, target, trial), so every
strategy sees identical measurements within a trial and results do not
depend on worker scheduling.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import estimators
from .channel import PathLossModel, sample_rss
from .fingerprint import (CategoryLabel, FingerprintMap, Label, PositionLabel,
                          build_map)
from .geometry import Box, PolygonRegion, Position
from .metrics import EstimateReport, TrialRecord

SCHEMA_VERSION = 1

# Purpose codes for derived random streams.
_STREAM_MEASUREMENT = 0
_STREAM_RAND_INIT = 1
_STREAM_MAP = 2
_STREAM_GEOMETRY = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (seed, purpose, ...) tuple."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class BaseStation:
    id: str
    position: Position
    dl_model: PathLossModel


@dataclass(frozen=True)
class Scenario:
    name: str
    bounds: Box
    receivers: tuple[Position, ...]
    base_stations: tuple[BaseStation, ...]
    ul_model: PathLossModel  # p0_dbm is generator truth; estimators never read it
    targets: tuple[Position, ...]
    trials_per_target: int
    fingerprint_grid: tuple[tuple[Position, Label], ...]
    knn_k: int
    fused_weight: float
    grid_resolution: float
    init_half_widths: Mapping[str, float]
    map_draws_per_point: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.bounds.area <= 0:
            raise ValueError("scenario bounds must have positive area")
        for what, pts in (("receiver", self.receivers), ("target", self.targets),
                          ("fingerprint point", [p for p, _ in self.fingerprint_grid])):
            for p in pts:
                if not self.bounds.contains(p):
                    raise ValueError(f"{what} {p} outside scenario bounds")
        if not self.receivers:
            raise ValueError("scenario needs at least one receiver")
        if not self.targets:
            raise ValueError("scenario needs at least one target")
        if self.trials_per_target < 1:
            raise ValueError("trials_per_target must be >= 1")
        if self.grid_resolution <= 0:
            raise ValueError("grid_resolution must be > 0")
        if self.fused_weight < 0:
            raise ValueError("fused_weight must be >= 0")
        if self.fingerprint_grid and not (1 <= self.knn_k <= len(self.fingerprint_grid)):
            raise ValueError("knn_k must be between 1 and the fingerprint point count")
        if self.map_draws_per_point < 1:
            raise ValueError("map_draws_per_point must be >= 1")
        missing = {"rand", "sdp", "fp"} - set(self.init_half_widths)
        if missing:
            raise ValueError(f"init_half_widths missing strategies: {sorted(missing)}")

    def localizer_config(self) -> estimators.LocalizerConfig:
        return estimators.LocalizerConfig(
            beta=self.ul_model.beta, bounds=self.bounds,
            resolution=self.grid_resolution, half_widths=dict(self.init_half_widths),
            knn_k=self.knn_k, fused_weight=self.fused_weight)


@dataclass(frozen=True)
class MeasurementSet:
    """One localization epoch: UL RSS per receiver, DL RSS per base station."""

    trial_id: int
    truth: Position
    ul: tuple[tuple[int, float], ...]  # (receiver index, dBm)
    dl: Mapping[str, float]  # base_station_id -> dBm


def build_fingerprint_from_scenario(s: Scenario, draws_per_point: int,
                                    rng: np.random.Generator) -> FingerprintMap:
    """Offline training phase: average `draws_per_point` DL samples per
    (collection point, base station), then build the map."""
    if not s.fingerprint_grid:
        raise ValueError(f"scenario {s.name!r} has no fingerprint grid")
    if draws_per_point < 1:
        raise ValueError("draws_per_point must be >= 1")
    raw = []
    for pos, label in s.fingerprint_grid:
        for bs in s.base_stations:
            for _ in range(draws_per_point):
                sample = sample_rss(bs.dl_model, bs.position, pos, rng,
                                    link="DL", source_id=bs.id)
                raw.append((pos, label, bs.id, sample.value_dbm))
    return build_map(raw)


def generate_trial(s: Scenario, target_index: int, trial_id: int,
                   rng: np.random.Generator) -> MeasurementSet:
    """Draw one epoch of UL and DL measurements at a target."""
    truth = s.targets[target_index]
    ul = tuple((i, sample_rss(s.ul_model, truth, r, rng, link="UL",
                              source_id=f"rx{i}").value_dbm)
               for i, r in enumerate(s.receivers))
    dl = {bs.id: sample_rss(bs.dl_model, bs.position, truth, rng, link="DL",
                            source_id=bs.id).value_dbm
          for bs in s.base_stations}
    return MeasurementSet(trial_id=trial_id, truth=truth, ul=ul, dl=dl)


def _run_trial(s: Scenario, strategies: tuple[str, ...],
               fmap: FingerprintMap | None, target_index: int,
               trial: int) -> list[TrialRecord]:
    trial_id = target_index * s.trials_per_target + trial
    ms = generate_trial(s, target_index, trial_id,
                        stream(s.seed, _STREAM_MEASUREMENT, target_index, trial))
    ul = [(s.receivers[i], v) for i, v in ms.ul]
    cfg = s.localizer_config()
    records = []
    for strategy in strategies:
        rng = (stream(s.seed, _STREAM_RAND_INIT, target_index, trial)
               if strategy == "rand" else None)
        try:
            res = estimators.localize(strategy, ul, ms.dl, cfg, fmap=fmap, rng=rng)
        except Exception:
            records.append(TrialRecord(trial_id, strategy, ms.truth,
                                       None, None, failed=True))
            continue
        err = math.hypot(res.estimate.x - ms.truth.x, res.estimate.y - ms.truth.y)
        records.append(TrialRecord(trial_id, strategy, ms.truth,
                                   res.estimate, err, failed=False))
    return records


def run_experiment(s: Scenario, strategies: Iterable[str],
                   fmap: FingerprintMap | None = None,
                   jobs: int = 1) -> EstimateReport:
    """Localize every (target, trial, strategy) and collect a report.

    Per-trial estimator failures are recorded (failed flag), not fatal.
    The report is bit-for-bit identical for a given (scenario, seed),
    whatever the `jobs` setting.
    """
    strategies = tuple(sorted(set(strategies)))
    unknown = set(strategies) - set(estimators.STRATEGIES)
    if unknown:
        raise ValueError(f"unknown strategies: {sorted(unknown)}")
    if not strategies:
        return EstimateReport(())
    if "fp" in strategies and fmap is None:
        raise ValueError("fp strategy requested but no fingerprint map given")

    tasks = [(ti, tr) for ti in range(len(s.targets))
             for tr in range(s.trials_per_target)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = pool.map(_run_trial, *zip(*[(s, strategies, fmap, ti, tr)
                                                 for ti, tr in tasks]),
                              chunksize=max(1, len(tasks) // (4 * jobs)))
            batches = list(chunks)
    else:
        batches = [_run_trial(s, strategies, fmap, ti, tr) for ti, tr in tasks]

    records = [r for batch in batches for r in batch]
    records.sort(key=lambda r: (r.strategy, r.trial_id))
    return EstimateReport(tuple(records))


def make_poor_geometry(s: Scenario, radius: float, corner: Position) -> Scenario:
    """Variant with all receivers clustered in a disk at a corner.

    Receivers are drawn uniformly from the disk intersected with the
    scenario bounds (the disk at a corner sticks out of the field), using a
    stream derived from the scenario seed, so the transform is pure.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    nearest = s.bounds.clamp(corner)
    if math.hypot(nearest.x - corner.x, nearest.y - corner.y) > radius:
        raise ValueError("disk does not reach the scenario bounds")
    rng = stream(s.seed, _STREAM_GEOMETRY)
    moved = []
    for _ in s.receivers:
        while True:
            r = radius * math.sqrt(rng.uniform(0.0, 1.0))
            phi = rng.uniform(0.0, 2.0 * math.pi)
            p = Position(corner.x + r * math.cos(phi), corner.y + r * math.sin(phi))
            if s.bounds.contains(p):
                moved.append(p)
                break
    return replace(s, receivers=tuple(moved))


# ---------------------------------------------------------------------------
# Scenario JSON files.


def _position_to_json(p: Position) -> list[float]:
    return [p.x, p.y]


def _model_to_json(m: PathLossModel) -> dict:
    return {"p0_dbm": m.p0_dbm, "beta": m.beta, "sigma_db": m.sigma_db}


def _model_from_json(d: dict, where: str) -> PathLossModel:
    try:
        return PathLossModel(p0_dbm=float(d["p0_dbm"]), beta=float(d["beta"]),
                             sigma_db=float(d["sigma_db"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{where}: bad path-loss model: {exc}") from None


def scenario_to_dict(s: Scenario) -> dict:
    grid = []
    regions: dict[str, list[list[float]]] = {}
    for pos, label in s.fingerprint_grid:
        if isinstance(label, PositionLabel):
            entry = {"position": _position_to_json(pos), "label": {"kind": "position"}}
            if label.position != pos:
                entry["label"]["position"] = _position_to_json(label.position)
        else:
            entry = {"position": _position_to_json(pos),
                     "label": {"kind": "category", "name": label.name}}
            regions[label.name] = [list(v) for v in label.region.vertices]
        grid.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "bounds": {"xmin": s.bounds.xmin, "ymin": s.bounds.ymin,
                   "xmax": s.bounds.xmax, "ymax": s.bounds.ymax},
        "receivers": [_position_to_json(p) for p in s.receivers],
        "base_stations": [{"id": b.id, "position": _position_to_json(b.position),
                           "dl_model": _model_to_json(b.dl_model)}
                          for b in s.base_stations],
        "ul_model": _model_to_json(s.ul_model),
        "targets": [_position_to_json(p) for p in s.targets],
        "trials_per_target": s.trials_per_target,
        "fingerprint_grid": grid,
        "category_regions": regions,
        "knn_k": s.knn_k,
        "fused_weight": s.fused_weight,
        "grid_resolution": s.grid_resolution,
        "init_half_widths": dict(s.init_half_widths),
        "map_draws_per_point": s.map_draws_per_point,
        "seed": s.seed,
    }


def scenario_from_dict(d: dict, where: str = "scenario") -> Scenario:
    try:
        version = d["schema_version"]
    except (KeyError, TypeError):
        raise ValueError(f"{where}: missing schema_version") from None
    if version != SCHEMA_VERSION:
        raise ValueError(f"{where}: unsupported schema_version {version!r}")

    def pos(v, field) -> Position:
        try:
            x, y = v
            return Position(float(x), float(y))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{where}: {field}: bad position {v!r}: {exc}") from None

    try:
        b = d["bounds"]
        bounds = Box(float(b["xmin"]), float(b["ymin"]),
                     float(b["xmax"]), float(b["ymax"]))
        regions = {name: PolygonRegion(tuple(tuple(float(c) for c in v) for v in verts))
                   for name, verts in d.get("category_regions", {}).items()}
        grid = []
        for i, g in enumerate(d.get("fingerprint_grid", [])):
            p = pos(g["position"], f"fingerprint_grid[{i}]")
            lab = g["label"]
            if lab["kind"] == "position":
                label: Label = PositionLabel(
                    pos(lab["position"], f"fingerprint_grid[{i}].label")
                    if "position" in lab else p)
            elif lab["kind"] == "category":
                name = lab["name"]
                if name not in regions:
                    raise ValueError(
                        f"{where}: fingerprint_grid[{i}]: no region for {name!r}")
                label = CategoryLabel(name, regions[name])
            else:
                raise ValueError(
                    f"{where}: fingerprint_grid[{i}]: unknown label kind {lab['kind']!r}")
            grid.append((p, label))
        return Scenario(
            name=str(d["name"]),
            bounds=bounds,
            receivers=tuple(pos(p, "receivers") for p in d["receivers"]),
            base_stations=tuple(
                BaseStation(str(b["id"]), pos(b["position"], "base_stations"),
                            _model_from_json(b["dl_model"], f"{where}: base_stations"))
                for b in d["base_stations"]),
            ul_model=_model_from_json(d["ul_model"], f"{where}: ul_model"),
            targets=tuple(pos(p, "targets") for p in d["targets"]),
            trials_per_target=int(d["trials_per_target"]),
            fingerprint_grid=tuple(grid),
            knn_k=int(d.get("knn_k", 1)),
            fused_weight=float(d.get("fused_weight", 0.0)),
            grid_resolution=float(d.get("grid_resolution", 1.0)),
            init_half_widths={k: float(v) for k, v in d["init_half_widths"].items()},
            map_draws_per_point=int(d.get("map_draws_per_point", 25)),
            seed=int(d.get("seed", 0)),
        )
    except KeyError as exc:
        raise ValueError(f"{where}: missing field {exc}") from None


def save_scenario(s: Scenario, path: str | Path) -> None:
    with open(path, "w") as f:
        json.dump(scenario_to_dict(s), f, indent=2, sort_keys=True)
        f.write("\n")


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    return scenario_from_dict(d, where=str(path))


def map_build_rng(s: Scenario) -> np.random.Generator:
    """The canonical stream for offline map building for this scenario."""
    return stream(s.seed, _STREAM_MAP)
