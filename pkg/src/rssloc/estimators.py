"""The three position estimators: RAND-MLE, SDP-MLE, and FP-MLE.

All three run the same 2-D grid search over squared-RSS residuals; they
differ only in how the search region is chosen (a uniform random point, an
SDP relaxation solved by a log-barrier Newton method, or a fingerprint kNN
match). The unknown reference power is eliminated in closed form at every
grid point, so the search never grids a third dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .channel import MIN_DISTANCE_M
from .fingerprint import FingerprintMap, Label, init_region, knn_match, map_rss_at
from .geometry import Box, Position, SearchRegion, lattice_points

Measurements = Sequence[tuple[Position, float]]  # (receiver position, UL dBm)

STRATEGIES = ("fp", "rand", "sdp")


@dataclass(frozen=True)
class UnknownVector:
    """The quantities the MLE solves for: 2-D position and reference power."""

    x: Position
    p0_dbm: float


@dataclass(frozen=True)
class GridSpec:
    region: SearchRegion
    resolution: float

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.region.area <= 0:
            raise ValueError("search region must have positive area")


@dataclass(frozen=True)
class LocalizerConfig:
    """Strategy-independent knobs shared by one experiment."""

    beta: float
    bounds: Box
    resolution: float
    half_widths: Mapping[str, float]  # per strategy, meters
    knn_k: int = 1
    fused_weight: float = 0.0


@dataclass(frozen=True)
class LocalizeResult:
    strategy: str
    estimate: Position
    p0_dbm: float
    cost: float
    init_position: Position | None = None
    init_label: Label | None = None


def _ul_arrays(measurements: Measurements) -> tuple[np.ndarray, np.ndarray]:
    if len(measurements) == 0:
        raise ValueError("need at least one measurement")
    rx = np.array([[p.x, p.y] for p, _ in measurements], dtype=float)
    power = np.array([v for _, v in measurements], dtype=float)
    return rx, power


def _attenuation_terms(points: np.ndarray, rx: np.ndarray, beta: float) -> np.ndarray:
    """10*beta*log10(d) for every (candidate point, receiver) pair, (M, N)."""
    d = np.hypot(points[:, 0:1] - rx[:, 0], points[:, 1:2] - rx[:, 1])
    np.maximum(d, MIN_DISTANCE_M, out=d)
    return 10.0 * beta * np.log10(d)


def mle_cost(theta: UnknownVector, measurements: Measurements, beta: float) -> float:
    """Sum of squared residuals (P_i - p0 + 10*beta*log10 d_i)^2, in dB^2."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    rx, power = _ul_arrays(measurements)
    att = _attenuation_terms(theta.x.as_array()[None, :], rx, beta)[0]
    resid = power - theta.p0_dbm + att
    return float(resid @ resid)


def closed_form_p0(x: Position, measurements: Measurements, beta: float) -> float:
    """Reference power minimizing mle_cost at a fixed position.

    The cost is quadratic in p0, so the minimizer is the mean of
    P_i + 10*beta*log10 d_i over the receivers.
    """
    rx, power = _ul_arrays(measurements)
    att = _attenuation_terms(x.as_array()[None, :], rx, beta)[0]
    return float(np.mean(power + att))


def _fingerprint_penalties(fmap: FingerprintMap, dl_rss: Mapping[str, float]) -> np.ndarray:
    """Per-entry sum of squared DL residuals over shared base stations, (E,)."""
    pen = np.zeros(len(fmap.entries))
    for j, e in enumerate(fmap.entries):
        pen[j] = sum((dl_rss[bs] - e.rss[bs]) ** 2
                     for bs in sorted(set(dl_rss) & set(e.rss)))
    return pen


def fp_mle_cost(theta: UnknownVector, measurements: Measurements, beta: float,
                dl_rss: Mapping[str, float], fmap: FingerprintMap,
                fused_weight: float) -> float:
    """Fused objective: UL residuals plus the weighted DL fingerprint residual.

    The fingerprint term compares the measured DL vector against the map
    vector at the point nearest to theta.x, summing squared differences per
    shared base station (a single station reduces to one squared term).
    """
    if fused_weight < 0:
        raise ValueError("fused_weight must be >= 0")
    cost = mle_cost(theta, measurements, beta)
    if fused_weight == 0.0:
        return cost
    stored = map_rss_at(fmap, theta.x)
    penalty = sum((dl_rss[bs] - stored[bs]) ** 2
                  for bs in sorted(set(dl_rss) & set(stored)))
    return cost + fused_weight * penalty


def grid_search_mle(grid: GridSpec, measurements: Measurements, beta: float, *,
                    dl_rss: Mapping[str, float] | None = None,
                    fmap: FingerprintMap | None = None,
                    fused_weight: float = 0.0,
                    within: Box | None = None) -> tuple[UnknownVector, float]:
    """Exhaustive search over the region's lattice points.

    Each candidate is scored with its closed-form p0; when `dl_rss` and
    `fmap` are given the fused objective is minimized instead. Ties go to
    the lowest cost, then to the lexicographically smallest position.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    pts = lattice_points(grid.region, grid.resolution, within=within)
    if pts.shape[0] == 0:
        raise ValueError("search region contains no grid points")
    rx, power = _ul_arrays(measurements)
    att = _attenuation_terms(pts, rx, beta)
    terms = power[None, :] + att
    p0 = terms.mean(axis=1)
    resid = terms - p0[:, None]
    costs = np.einsum("ij,ij->i", resid, resid)
    if dl_rss is not None and fmap is not None and fused_weight > 0.0:
        pen = _fingerprint_penalties(fmap, dl_rss)
        pos = fmap.positions()
        d2 = (pts[:, 0:1] - pos[:, 0]) ** 2 + (pts[:, 1:2] - pos[:, 1]) ** 2
        costs = costs + fused_weight * pen[np.argmin(d2, axis=1)]
    best = np.lexsort((pts[:, 1], pts[:, 0], costs))[0]
    theta = UnknownVector(Position(float(pts[best, 0]), float(pts[best, 1])),
                          float(p0[best]))
    return theta, float(costs[best])


def rand_init(bounds: Box, rng: np.random.Generator) -> Position:
    """Uniform draw over an axis-aligned box."""
    return Position(float(rng.uniform(bounds.xmin, bounds.xmax)),
                    float(rng.uniform(bounds.ymin, bounds.ymax)))


# ---------------------------------------------------------------------------
# SDP initializer.
#
# The relaxation minimizes sum_i (h_i * lambda_i - alpha)^2 over (x, z,
# alpha) with h_i = r_i.r_i - 2 r_i.x + z substituted in and the 3x3 PSD
# constraint reduced to z >= x.x (Schur complement: the top-left block is
# the identity). lambda_i = 10^(P_i / 5 beta), alpha = 10^(p0 / 5 beta).
# The 4-dimensional convex program is solved with a log-barrier Newton
# method; coordinates are pre-scaled so the Hessian stays well conditioned,
# which leaves the objective value itself unchanged.


@dataclass(frozen=True)
class SdpSolution:
    x: Position
    z: float
    alpha: float
    h: tuple[float, ...]
    cost: float


class SdpNonConvergence(RuntimeError):
    """Barrier solver ran out of Newton steps; carries the best iterate."""

    def __init__(self, message: str, best: SdpSolution):
        super().__init__(message)
        self.best = best


def _sdp_solution(v: np.ndarray, scale: float, kappa: float, rx: np.ndarray,
                  A: np.ndarray, q: np.ndarray) -> SdpSolution:
    x = Position(float(v[0] * scale), float(v[1] * scale))
    z = float(v[2] * scale * scale)
    r = A @ v + q
    h = rx[:, 0] ** 2 + rx[:, 1] ** 2 - 2.0 * (rx[:, 0] * x.x + rx[:, 1] * x.y) + z
    return SdpSolution(x=x, z=z, alpha=float(v[3] / kappa),
                       h=tuple(float(hi) for hi in h),
                       cost=float(r @ r) / (kappa * kappa))


def solve_sdp_init(measurements: Measurements, beta: float, *,
                   gap_tol: float = 1e-9, barrier_factor: float = 10.0,
                   t_init: float = 1.0, max_newton_steps: int = 200) -> SdpSolution:
    """Solve the SDP relaxation and return a strictly feasible minimizer.

    The duality-gap proxy for the single inequality constraint is 1/t; the
    barrier loop runs until it guarantees an objective within gap_tol of
    the optimum, both in the problem's own units and after the internal
    residual normalization. On noise-free inputs the optimum cost is zero,
    so the returned cost itself is <= gap_tol.
    """
    if beta <= 0:
        raise ValueError("beta must be > 0")
    rx, power = _ul_arrays(measurements)
    lam = 10.0 ** (power / (5.0 * beta))

    # Two exact rescalings keep the Newton system well conditioned:
    # coordinates in units of `scale` (z in scale^2), which leaves every
    # residual unchanged, and residuals scaled by kappa so the objective at
    # the initial iterate is O(1). The reported cost is mapped back.
    scale = max(1.0, float(np.abs(rx).max()))
    centroid = Position(float(rx[:, 0].mean()), float(rx[:, 1].mean()))
    alpha0 = 10.0 ** (closed_form_p0(centroid, measurements, beta) / (5.0 * beta))
    c_orig = rx[:, 0] ** 2 + rx[:, 1] ** 2
    h0 = (c_orig - 2.0 * (rx[:, 0] * centroid.x + rx[:, 1] * centroid.y)
          + centroid.x ** 2 + centroid.y ** 2 + 1.0)
    f0 = float(np.sum((h0 * lam - alpha0) ** 2))
    kappa = 1.0 / max(math.sqrt(f0), alpha0, 1e-300)

    rs = rx / scale
    lam_s = lam * scale * scale * kappa
    c = rs[:, 0] ** 2 + rs[:, 1] ** 2
    A = np.column_stack([-2.0 * lam_s * rs[:, 0], -2.0 * lam_s * rs[:, 1],
                         lam_s, -np.ones_like(lam_s)])
    q = lam_s * c
    G = 2.0 * (A.T @ A)
    stop_gap = gap_tol * min(1.0, kappa * kappa)

    v = np.array([centroid.x / scale, centroid.y / scale, 0.0, kappa * alpha0])
    v[2] = v[0] ** 2 + v[1] ** 2 + 1.0 / (scale * scale)  # z = |x|^2 + 1 m^2

    def slack(w: np.ndarray) -> float:
        return w[2] - w[0] ** 2 - w[1] ** 2

    def barrier_value(w: np.ndarray, t: float) -> float:
        s = slack(w)
        if s <= 0:
            return math.inf
        r = A @ w + q
        return t * float(r @ r) - math.log(s)

    steps_left = max_newton_steps
    t = t_init
    while True:
        # Centering at the current t.
        while True:
            if steps_left == 0:
                raise SdpNonConvergence(
                    f"no convergence within {max_newton_steps} Newton steps",
                    _sdp_solution(v, scale, kappa, rx, A, q))
            steps_left -= 1
            s = slack(v)
            r = A @ v + q
            ds = np.array([-2.0 * v[0], -2.0 * v[1], 1.0, 0.0])
            g = t * 2.0 * (A.T @ r) - ds / s
            H = t * G + np.outer(ds, ds) / (s * s)
            H[0, 0] += 2.0 / s
            H[1, 1] += 2.0 / s
            try:
                delta = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                # Degenerate relaxation (e.g. a single receiver, where the
                # zero-cost set is unbounded): no center to converge to.
                raise SdpNonConvergence(
                    "Newton system is singular",
                    _sdp_solution(v, scale, kappa, rx, A, q)) from None
            decrement2 = float(-g @ delta)
            # The relative term sits two decades above the float-resolution
            # floor of t*f; stopping there costs ~decrement2/t objective,
            # i.e. a relative error around 1e-11.
            if decrement2 / 2.0 <= max(1e-9, t * float(r @ r) * 1e-11):
                break
            # Longest step keeping the iterate strictly feasible:
            # slack(v + eta*delta) = s - b*eta - a*eta^2.
            a = delta[0] ** 2 + delta[1] ** 2
            b = 2.0 * (v[0] * delta[0] + v[1] * delta[1]) - delta[2]
            if a > 0:
                eta_max = (-b + math.sqrt(b * b + 4.0 * a * s)) / (2.0 * a)
            elif b > 0:
                eta_max = s / b
            else:
                eta_max = math.inf
            eta = min(1.0, 0.99 * eta_max)
            base = barrier_value(v, t)
            while eta > 1e-14:
                if barrier_value(v + eta * delta, t) <= base - 0.25 * eta * decrement2:
                    break
                eta *= 0.5
            if eta <= 1e-14:
                # Rounding in t*f swamps the attainable decrease: this stage
                # is centered to float precision, which is all we can do.
                break
            v = v + eta * delta
        if 1.0 / t < stop_gap:
            return _sdp_solution(v, scale, kappa, rx, A, q)
        t *= barrier_factor


def localize(strategy: str, measurements: Measurements,
             dl_rss: Mapping[str, float], cfg: LocalizerConfig,
             fmap: FingerprintMap | None = None,
             rng: np.random.Generator | None = None) -> LocalizeResult:
    """Run one strategy end to end: pick the search region, grid-search it.

    Search boxes are intersected with the scenario bounds; an SDP position
    falling outside the bounds is projected onto them first so the clamped
    box is never empty.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    hw = float(cfg.half_widths[strategy])
    init_position: Position | None = None
    init_label: Label | None = None
    dl = None
    weight = 0.0

    if strategy == "rand":
        if rng is None:
            raise ValueError("rand strategy needs an rng")
        init_position = rand_init(cfg.bounds, rng)
        region: SearchRegion = Box.around(init_position, hw)
    elif strategy == "sdp":
        sol = solve_sdp_init(measurements, cfg.beta)
        init_position = sol.x
        region = Box.around(cfg.bounds.clamp(sol.x), hw)
    else:  # fp
        if fmap is None:
            raise ValueError("fp strategy needs a fingerprint map")
        if not dl_rss:
            raise ValueError("fp strategy needs a DL RSS vector")
        init_label = knn_match(fmap, dl_rss, cfg.knn_k)
        region = init_region(init_label, hw)
        dl = dl_rss
        weight = cfg.fused_weight

    if isinstance(region, Box):
        clipped = region.intersect(cfg.bounds)
        if clipped is None:  # unreachable: centers are clamped into bounds
            raise ValueError("search region does not meet the scenario bounds")
        region = clipped

    theta, cost = grid_search_mle(GridSpec(region, cfg.resolution), measurements,
                                  cfg.beta, dl_rss=dl, fmap=fmap,
                                  fused_weight=weight, within=cfg.bounds)
    return LocalizeResult(strategy=strategy, estimate=theta.x, p0_dbm=theta.p0_dbm,
                          cost=cost, init_position=init_position,
                          init_label=init_label)
