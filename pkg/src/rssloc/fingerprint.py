"""Downlink-RSS fingerprint map: offline averaging, kNN matching, lookups.

The map is built once from raw georeferenced observations (averaged per
point and base station) and is immutable afterwards; every query here is
read-only. Labels are either the collection position itself or a named
category with an attached search region (e.g. a building footprint).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .geometry import Box, PolygonRegion, Position, SearchRegion


@dataclass(frozen=True)
class PositionLabel:
    position: Position

    def sort_key(self):
        return ("position", self.position.x, self.position.y)


@dataclass(frozen=True)
class CategoryLabel:
    name: str
    region: PolygonRegion

    def sort_key(self):
        return ("category", self.name)


Label = PositionLabel | CategoryLabel


@dataclass(frozen=True)
class FingerprintEntry:
    """Averaged DL-RSS vector recorded at one collection point."""

    position: Position
    label: Label
    rss: Mapping[str, float]  # base_station_id -> dBm

    def __post_init__(self):
        if not self.rss:
            raise ValueError("entry needs at least one base-station value")


@dataclass
class FingerprintMap:
    """Offline database; entries sorted by position, ids in first-seen order."""

    entries: tuple[FingerprintEntry, ...]
    base_station_ids: tuple[str, ...]
    _positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.entries:
            raise ValueError("fingerprint map must have at least one entry")
        known = set(self.base_station_ids)
        for e in self.entries:
            if not set(e.rss) <= known:
                raise ValueError(f"entry at {e.position} keyed by unknown base station")
        self._positions = np.array([[e.position.x, e.position.y] for e in self.entries])

    def __len__(self) -> int:
        return len(self.entries)

    def positions(self) -> np.ndarray:
        """(N, 2) array of entry positions, in entry order."""
        return self._positions


def build_map(raw_observations: Iterable[tuple[Position, Label, str, float]]) -> FingerprintMap:
    """Average raw (position, label, base_station_id, dBm) rows into a map.

    One entry per distinct position; the stored value per base station is
    the arithmetic mean of all raw observations there. The label of a
    point is taken from its observations, which must agree.
    """
    sums: dict[tuple[float, float], dict[str, list[float]]] = {}
    labels: dict[tuple[float, float], Label] = {}
    ids: list[str] = []
    n = 0
    for pos, label, bs_id, value in raw_observations:
        n += 1
        key = (pos.x, pos.y)
        if key in labels:
            if labels[key] != label:
                raise ValueError(f"conflicting labels at position {pos}")
        else:
            labels[key] = label
            sums[key] = {}
        sums[key].setdefault(bs_id, []).append(float(value))
        if bs_id not in ids:
            ids.append(bs_id)
    if n == 0:
        raise ValueError("no observations")

    entries = []
    for key in sorted(sums):
        rss = {bs: float(np.mean(vals)) for bs, vals in sums[key].items()}
        entries.append(FingerprintEntry(Position(*key), labels[key], rss))
    return FingerprintMap(tuple(entries), tuple(ids))


def mse_distance(query: Mapping[str, float], entry: FingerprintEntry) -> float:
    """Mean squared dBm difference over the base stations both sides share."""
    shared = sorted(set(query) & set(entry.rss))
    if not shared:
        raise ValueError("query and entry share no base stations")
    return float(np.mean([(query[bs] - entry.rss[bs]) ** 2 for bs in shared]))


def knn_match(fmap: FingerprintMap, query: Mapping[str, float], k: int) -> Label:
    """Plurality label among the k entries with the smallest MSE to the query.

    Entries sharing no base station with the query are skipped. Vote ties
    go to the tied label whose members have the smallest summed MSE, then
    to the lexicographically smallest label.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = []
    for e in fmap.entries:
        shared = set(query) & set(e.rss)
        if shared:
            scored.append((mse_distance(query, e), e))
    if not scored:
        raise ValueError("query shares no base stations with the map")
    if k > len(scored):
        raise ValueError(f"k={k} exceeds the {len(scored)} usable entries")

    scored.sort(key=lambda t: (t[0], t[1].position.sort_key()))
    votes: dict[tuple, tuple[Label, int, float]] = {}
    for mse, e in scored[:k]:
        lk = e.label.sort_key()
        label, count, total = votes.get(lk, (e.label, 0, 0.0))
        votes[lk] = (label, count + 1, total + mse)
    best = min(votes.items(), key=lambda kv: (-kv[1][1], kv[1][2], kv[0]))
    return best[1][0]


def init_region(label: Label, position_range: float) -> SearchRegion:
    """Search region implied by a matched label.

    A position label opens a square box of the given half-width around it;
    a category label carries its own predefined polygon.
    """
    if isinstance(label, CategoryLabel):
        return label.region
    if position_range <= 0:
        raise ValueError("position_range must be > 0")
    return Box.around(label.position, position_range)


def nearest_entry_index(fmap: FingerprintMap, x: Position) -> int:
    """Index of the entry nearest to x; distance ties go to the entry with
    the lexicographically smallest position (entries are stored sorted)."""
    d2 = np.sum((fmap.positions() - x.as_array()) ** 2, axis=1)
    return int(np.argmin(d2))


def map_rss_at(fmap: FingerprintMap, x: Position) -> dict[str, float]:
    """RSS vector of the map point nearest to x (exact hits return that entry)."""
    return dict(fmap.entries[nearest_entry_index(fmap, x)].rss)


# ---------------------------------------------------------------------------
# File format: CSV with one row per (position, base station), plus a JSON
# sidecar holding category-label polygons keyed by label name.

_CSV_HEADER = ["x", "y", "label_kind", "label_value", "bs_id", "rss_dbm"]


def regions_sidecar_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + "_regions.json")


def _label_fields(label: Label) -> tuple[str, str]:
    if isinstance(label, PositionLabel):
        return "position", f"{label.position.x!r};{label.position.y!r}"
    return "category", label.name


def write_map_csv(fmap: FingerprintMap, path: str | Path) -> None:
    """Write the map CSV; category polygons go to a `<stem>_regions.json` sidecar."""
    path = Path(path)
    regions: dict[str, list[list[float]]] = {}
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_CSV_HEADER)
        for e in fmap.entries:
            kind, value = _label_fields(e.label)
            if isinstance(e.label, CategoryLabel):
                regions[e.label.name] = [list(v) for v in e.label.region.vertices]
            for bs in sorted(e.rss):
                w.writerow([repr(e.position.x), repr(e.position.y),
                            kind, value, bs, repr(e.rss[bs])])
    if regions:
        with open(regions_sidecar_path(path), "w") as f:
            json.dump(regions, f, indent=2, sort_keys=True)
            f.write("\n")


def read_map_csv(path: str | Path) -> FingerprintMap:
    """Read a map CSV written by write_map_csv. Raises ValueError with the
    offending line number on schema violations."""
    path = Path(path)
    regions: dict[str, PolygonRegion] | None = None
    raw: list[tuple[Position, Label, str, float]] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(_CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(_CSV_HEADER)} fields")
            try:
                pos = Position(float(row[0]), float(row[1]))
                value = float(row[5])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            kind, label_value, bs_id = row[2], row[3], row[4]
            if kind == "position":
                try:
                    px, py = (float(v) for v in label_value.split(";"))
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: position label_value must be 'x;y'") from None
                label: Label = PositionLabel(Position(px, py))
            elif kind == "category":
                if regions is None:
                    sidecar = regions_sidecar_path(path)
                    if not sidecar.exists():
                        raise ValueError(
                            f"{path}:{lineno}: category label needs sidecar {sidecar}")
                    with open(sidecar) as sf:
                        regions = {name: PolygonRegion(tuple(tuple(v) for v in verts))
                                   for name, verts in json.load(sf).items()}
                if label_value not in regions:
                    raise ValueError(
                        f"{path}:{lineno}: no polygon for category {label_value!r}")
                label = CategoryLabel(label_value, regions[label_value])
            else:
                raise ValueError(f"{path}:{lineno}: unknown label_kind {kind!r}")
            raw.append((pos, label, bs_id, value))
    if not raw:
        raise ValueError(f"{path}: no data rows")
    return build_map(raw)
