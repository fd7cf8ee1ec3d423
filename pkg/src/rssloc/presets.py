"""Canonical scenarios: open space, urban, and indoor.

Layouts approximate the published test environments (counts, scales, and
geometry class); exact coordinates are not recoverable from the figures,
and the path-loss exponents are assumptions, documented in the README.
The urban map uses category labels (one polygon per building); the open
and indoor maps use position labels.
"""

from __future__ import annotations

import math

import numpy as np

from .channel import PathLossModel
from .fingerprint import CategoryLabel, Label, PositionLabel
from .geometry import Box, PolygonRegion, Position
from .scenario import BaseStation, Scenario


def open_space_scenario(seed: int = 20230) -> Scenario:
    """Stadium field, one distant base station, 10 m fingerprint grid."""
    bounds = Box(0.0, 0.0, 100.0, 60.0)
    grid = tuple(
        (Position(float(x), float(y)), PositionLabel(Position(float(x), float(y))))
        for x in range(0, 101, 10) for y in range(0, 61, 10))
    return Scenario(
        name="open_space",
        bounds=bounds,
        # Not concyclic: four receivers on a common circle would make the
        # noise-free SDP relaxation rank-deficient.
        receivers=(Position(5.0, 5.0), Position(95.0, 8.0),
                   Position(88.0, 52.0), Position(35.0, 45.0)),
        base_stations=(BaseStation(
            "bs1", Position(150.0, 120.0),
            PathLossModel(p0_dbm=-30.0, beta=2.2, sigma_db=2.0)),),
        ul_model=PathLossModel(p0_dbm=-30.0, beta=2.2, sigma_db=2.0),
        targets=(Position(20.0, 20.0), Position(40.0, 30.0), Position(60.0, 20.0),
                 Position(80.0, 40.0), Position(50.0, 50.0), Position(30.0, 40.0),
                 Position(70.0, 10.0)),
        trials_per_target=10,
        fingerprint_grid=grid,
        knn_k=1,
        fused_weight=0.01,
        grid_resolution=1.0,
        init_half_widths={"rand": 15.0, "sdp": 15.0, "fp": 15.0},
        map_draws_per_point=25,
        seed=seed,
    )


# Building centers sit on one arc around the upper-left corner (so that a
# receiver cluster there, the poor-geometry variant, sees all three at the
# same range), while their distances to the base station stay separated
# enough for the one-station kNN match to tell them apart.
_URBAN_CORNER = (0.0, 200.0)
_URBAN_ARC_RADIUS = 120.0
_URBAN_ANGLES_DEG = (-10.0, -45.0, -80.0)
_URBAN_BUILDING_HALF = 21.0
_URBAN_NAMES = ("general_education_hall", "libertas_hall_a", "veritas_hall_c")


def _urban_centers() -> list[Position]:
    cx, cy = _URBAN_CORNER
    out = []
    for deg in _URBAN_ANGLES_DEG:
        a = math.radians(deg)
        out.append(Position(round(cx + _URBAN_ARC_RADIUS * math.cos(a), 1),
                            round(min(cy + _URBAN_ARC_RADIUS * math.sin(a),
                                      200.0 - _URBAN_BUILDING_HALF - 2.0), 1)))
    return out


def _urban_buildings() -> dict[str, PolygonRegion]:
    out = {}
    for name, c in zip(_URBAN_NAMES, _urban_centers()):
        h = _URBAN_BUILDING_HALF
        out[name] = PolygonRegion(((c.x - h, c.y - h), (c.x + h, c.y - h),
                                   (c.x + h, c.y + h), (c.x - h, c.y + h)))
    return out


def _urban_points() -> list[tuple[Position, str]]:
    """18 collection points, six per building."""
    pts = []
    w = _URBAN_BUILDING_HALF - 9.0
    for name, c in zip(_URBAN_NAMES, _urban_centers()):
        for dx, dy in ((-w, -w), (w, -w), (-w, w), (w, w), (0.0, 0.0), (0.0, w)):
            pts.append((Position(c.x + dx, c.y + dy), name))
    return pts


def urban_scenario(seed: int = 20231) -> Scenario:
    """Campus with three buildings; fingerprints carry category labels."""
    buildings = _urban_buildings()
    points = _urban_points()
    grid: tuple[tuple[Position, Label], ...] = tuple(
        (p, CategoryLabel(name, buildings[name])) for p, name in points)
    # Ten target placements drawn from the 18 candidate points, fixed here
    # so the shipped scenario is fully explicit.
    picker = np.random.default_rng(77)
    target_idx = sorted(picker.choice(len(points), size=10, replace=False).tolist())
    targets = tuple(points[i][0] for i in target_idx)
    return Scenario(
        name="urban",
        bounds=Box(0.0, 0.0, 200.0, 200.0),
        receivers=(Position(15.0, 15.0), Position(185.0, 90.0),
                   Position(95.0, 185.0)),
        base_stations=(BaseStation(
            "bs1", Position(169.4, 185.2),
            PathLossModel(p0_dbm=-30.0, beta=3.5, sigma_db=4.0)),),
        ul_model=PathLossModel(p0_dbm=-30.0, beta=3.0, sigma_db=4.0),
        targets=targets,
        trials_per_target=100,
        fingerprint_grid=grid,
        knn_k=5,
        fused_weight=0.01,
        grid_resolution=1.0,
        init_half_widths={"rand": 30.0, "sdp": 30.0, "fp": 30.0},
        map_draws_per_point=25,
        seed=seed,
    )


def indoor_scenario(seed: int = 20232) -> Scenario:
    """One hall floor, three repeaters, 13 collection points."""
    pts = [Position(5.0, 5.0), Position(12.5, 5.0), Position(20.0, 5.0),
           Position(27.5, 5.0), Position(35.0, 5.0), Position(42.5, 5.0),
           Position(5.0, 15.0), Position(15.0, 15.0), Position(25.0, 15.0),
           Position(35.0, 15.0), Position(45.0, 15.0),
           Position(15.0, 25.0), Position(35.0, 25.0)]
    grid = tuple((p, PositionLabel(p)) for p in pts)
    dl = PathLossModel(p0_dbm=-40.0, beta=2.5, sigma_db=3.0)
    return Scenario(
        name="indoor",
        bounds=Box(0.0, 0.0, 50.0, 30.0),
        receivers=(Position(2.0, 2.0), Position(48.0, 2.0), Position(25.0, 28.0)),
        base_stations=(BaseStation("rep1", Position(8.0, 22.0), dl),
                       BaseStation("rep2", Position(25.0, 8.0), dl),
                       BaseStation("rep3", Position(42.0, 22.0), dl)),
        ul_model=PathLossModel(p0_dbm=-30.0, beta=2.5, sigma_db=3.0),
        targets=tuple(pts),
        trials_per_target=100,
        fingerprint_grid=grid,
        knn_k=1,
        fused_weight=0.01,
        grid_resolution=1.0,
        init_half_widths={"rand": 10.0, "sdp": 10.0, "fp": 10.0},
        map_draws_per_point=25,
        seed=seed,
    )


PRESETS = {
    "open_space": open_space_scenario,
    "urban": urban_scenario,
    "indoor": indoor_scenario,
}
