"""2D geometry shared across the channel, fingerprint, and estimator code.

Positions live in a local east/north frame in meters. Search regions are
either axis-aligned boxes or simple polygons; grid candidates are drawn from
the global lattice of spacing `resolution` (multiples of the resolution),
so a point with lattice-aligned coordinates is a grid candidate of every
region that contains it, regardless of where the region is centered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon

_LATTICE_EPS = 1e-9


@dataclass(frozen=True)
class Position:
    """A point in meters: x east, y north."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite position ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def sort_key(self) -> tuple[float, float]:
        return (self.x, self.y)


def distance(a: Position, b: Position) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle, closed on all sides. Zero extent is allowed."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValueError(f"inverted box {self}")

    @classmethod
    def around(cls, center: Position, half_width: float) -> "Box":
        if half_width < 0:
            raise ValueError("half_width must be >= 0")
        return cls(center.x - half_width, center.y - half_width,
                   center.x + half_width, center.y + half_width)

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @property
    def center(self) -> Position:
        return Position(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains(self, p: Position) -> bool:
        return self.xmin <= p.x <= self.xmax and self.ymin <= p.y <= self.ymax

    def contains_xy(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return (xs >= self.xmin) & (xs <= self.xmax) & (ys >= self.ymin) & (ys <= self.ymax)

    def intersect(self, other: "Box") -> "Box | None":
        xmin, ymin = max(self.xmin, other.xmin), max(self.ymin, other.ymin)
        xmax, ymax = min(self.xmax, other.xmax), min(self.ymax, other.ymax)
        if xmin > xmax or ymin > ymax:
            return None
        return Box(xmin, ymin, xmax, ymax)

    def clamp(self, p: Position) -> Position:
        """Project a point onto the box."""
        return Position(min(max(p.x, self.xmin), self.xmax),
                        min(max(p.y, self.ymin), self.ymax))


@dataclass(frozen=True)
class PolygonRegion:
    """Simple polygon region; containment includes the boundary."""

    vertices: tuple[tuple[float, float], ...]
    _geom: _ShapelyPolygon = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        geom = _ShapelyPolygon(self.vertices)
        if not geom.is_valid or geom.area <= 0:
            raise ValueError("polygon must be simple with positive area")
        object.__setattr__(self, "_geom", geom)

    @property
    def area(self) -> float:
        return self._geom.area

    @property
    def bounding_box(self) -> Box:
        xmin, ymin, xmax, ymax = self._geom.bounds
        return Box(xmin, ymin, xmax, ymax)

    def contains(self, p: Position) -> bool:
        return bool(shapely.intersects_xy(self._geom, p.x, p.y))

    def contains_xy(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return shapely.intersects_xy(self._geom, xs, ys)

    def __getstate__(self):
        return self.vertices

    def __setstate__(self, vertices):
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "_geom", _ShapelyPolygon(vertices))


SearchRegion = Box | PolygonRegion


def _lattice_axis(lo: float, hi: float, resolution: float) -> np.ndarray:
    kmin = math.ceil(lo / resolution - _LATTICE_EPS)
    kmax = math.floor(hi / resolution + _LATTICE_EPS)
    if kmax < kmin:
        return np.empty(0)
    return np.arange(kmin, kmax + 1, dtype=float) * resolution


def lattice_points(region: SearchRegion, resolution: float,
                   within: Box | None = None) -> np.ndarray:
    """Global-lattice candidates inside a region, as an (M, 2) array.

    Points are multiples of `resolution` on both axes, ordered
    lexicographically by (x, y). `within` optionally restricts the
    candidates to a second box (e.g. scenario bounds).
    """
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    bbox = region if isinstance(region, Box) else region.bounding_box
    if within is not None:
        bbox = bbox.intersect(within)
        if bbox is None:
            return np.empty((0, 2))
    xs = _lattice_axis(bbox.xmin, bbox.xmax, resolution)
    ys = _lattice_axis(bbox.ymin, bbox.ymax, resolution)
    if xs.size == 0 or ys.size == 0:
        return np.empty((0, 2))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    if isinstance(region, PolygonRegion):
        pts = pts[region.contains_xy(pts[:, 0], pts[:, 1])]
    return pts
