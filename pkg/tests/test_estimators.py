import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssloc import (Box, CategoryLabel, GridSpec, LocalizerConfig, PathLossModel,
                    PolygonRegion, Position, PositionLabel, SdpNonConvergence,
                    UnknownVector, build_map, closed_form_p0, distance, expected_rss,
                    fp_mle_cost, grid_search_mle, localize, mle_cost, rand_init,
                    sample_rss, solve_sdp_init)

BETA = 3.0
UL = PathLossModel(-30.0, BETA, 0.0)

# Receivers deliberately not on a common circle: concyclic layouts make the
# noise-free relaxation rank-deficient and the recovered position arbitrary.
RX4 = (Position(5, 5), Position(95, 10), Position(90, 90), Position(40, 60))
RX3 = (Position(15, 15), Position(185, 105), Position(60, 185))


def noiseless(receivers, truth, model=UL):
    return [(r, expected_rss(model, truth, r)) for r in receivers]


def noisy(receivers, truth, sigma, seed, p0=-30.0, beta=BETA):
    model = PathLossModel(p0, beta, sigma)
    rng = np.random.default_rng(seed)
    return [(r, sample_rss(model, truth, r, rng).value_dbm) for r in receivers]


# --- mle_cost / closed_form_p0 ----------------------------------------------

def test_mle_cost_zero_at_truth():
    truth = Position(30, 40)
    meas = noiseless(RX4, truth)
    assert mle_cost(UnknownVector(truth, -30.0), meas, BETA) == pytest.approx(0.0, abs=1e-18)


def test_mle_cost_single_consistent_measurement():
    theta = UnknownVector(Position(0, 0), -30.0)
    assert mle_cost(theta, [(Position(10, 0), -60.0)], BETA) == pytest.approx(0.0)


def test_mle_cost_single_inconsistent_measurement():
    theta = UnknownVector(Position(0, 0), -30.0)
    assert mle_cost(theta, [(Position(100, 0), -60.0)], BETA) == pytest.approx(900.0)


def test_mle_cost_invariant_under_receiver_permutation():
    truth = Position(20, 70)
    meas = noisy(RX4, truth, sigma=4.0, seed=9)
    theta = UnknownVector(Position(33, 41), -28.0)
    base = mle_cost(theta, meas, BETA)
    rng = np.random.default_rng(0)
    for _ in range(5):
        perm = rng.permutation(len(meas))
        assert mle_cost(theta, [meas[i] for i in perm], BETA) == pytest.approx(base)


def test_closed_form_p0_single_measurement():
    assert closed_form_p0(Position(0, 0), [(Position(10, 0), -60.0)], BETA) == \
        pytest.approx(-30.0)


def test_closed_form_p0_consistent_measurements():
    truth = Position(30, 40)
    meas = noiseless(RX4, truth)
    assert closed_form_p0(truth, meas, BETA) == pytest.approx(-30.0)


def test_closed_form_p0_matches_sweep_oracle():
    rng = np.random.default_rng(4)
    sweep = np.arange(-100.0, 0.0 + 1e-9, 0.01)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        truth = Position(float(rng.uniform(0, 100)), float(rng.uniform(0, 100)))
        model = PathLossModel(float(rng.uniform(-60, -30)), BETA, 6.0)
        meas = [(Position(float(rng.uniform(0, 100)), float(rng.uniform(0, 100))),
                 0.0) for _ in range(n)]
        meas = [(r, sample_rss(model, truth, r, rng).value_dbm) for r, _ in meas]
        x = Position(float(rng.uniform(0, 100)), float(rng.uniform(0, 100)))
        # Brute-force enumeration of the 1-D profile cost in p0.
        terms = np.array([v + 10 * BETA * math.log10(max(distance(x, r), 0.1))
                          for r, v in meas])
        costs = ((terms[None, :] - sweep[:, None]) ** 2).sum(axis=1)
        best = sweep[int(np.argmin(costs))]
        assert abs(closed_form_p0(x, meas, BETA) - best) <= 0.01


# --- grid search -------------------------------------------------------------

def test_grid_search_recovers_truth_noiseless():
    truth = Position(30, 40)
    meas = noiseless((Position(0, 0), Position(100, 0), Position(0, 100)), truth)
    theta, cost = grid_search_mle(GridSpec(Box(0, 0, 100, 100), 1.0), meas, BETA)
    assert theta.x == truth
    assert cost == pytest.approx(0.0, abs=1e-12)
    assert theta.p0_dbm == pytest.approx(-30.0)


def test_grid_search_matches_exhaustive_scan_on_restricted_region():
    truth = Position(30, 40)
    meas = noisy(RX4, truth, sigma=4.0, seed=21)
    region = Box(50, 50, 70, 65)  # excludes the truth
    theta, cost = grid_search_mle(GridSpec(region, 1.0), meas, BETA)
    assert region.contains(theta.x)
    assert cost > 0
    best = None
    for x in range(50, 71):
        for y in range(50, 66):
            p = Position(float(x), float(y))
            c = mle_cost(UnknownVector(p, closed_form_p0(p, meas, BETA)), meas, BETA)
            if best is None or c < best[1]:
                best = (p, c)
    assert theta.x == best[0]
    assert cost == pytest.approx(best[1], rel=1e-9)


def test_grid_search_single_lattice_point():
    meas = noiseless(RX4, Position(30, 40))
    theta, _ = grid_search_mle(GridSpec(Box(4.5, 6.5, 5.5, 7.5), 1.0), meas, BETA)
    assert theta.x == Position(5.0, 7.0)


def test_grid_search_empty_region_rejected():
    meas = noiseless(RX4, Position(30, 40))
    with pytest.raises(ValueError, match="no grid points"):
        grid_search_mle(GridSpec(Box(4.1, 4.1, 4.9, 4.9), 1.0), meas, BETA)


def test_grid_uses_global_lattice_alignment():
    truth = Position(30, 40)
    meas = noiseless(RX4, truth)
    # An off-lattice region still evaluates on-lattice candidates, so the
    # on-lattice truth is recovered exactly.
    region = Box(25.3, 33.7, 37.2, 48.1)
    theta, cost = grid_search_mle(GridSpec(region, 1.0), meas, BETA)
    assert theta.x == truth


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(Box(0, 0, 10, 10), 0.0)
    with pytest.raises(ValueError):
        GridSpec(Box(0, 0, 0, 10), 1.0)


# --- rand_init ---------------------------------------------------------------

def test_rand_init_uniform_mean():
    rng = np.random.default_rng(17)
    draws = [rand_init(Box(0, 0, 100, 100), rng) for _ in range(10_000)]
    assert np.mean([p.x for p in draws]) == pytest.approx(50.0, abs=2.0)
    assert np.mean([p.y for p in draws]) == pytest.approx(50.0, abs=2.0)


def test_rand_init_degenerate_box():
    p = rand_init(Box(5, 5, 5, 5), np.random.default_rng(0))
    assert (p.x, p.y) == (5.0, 5.0)


def test_rand_init_seed_reproducible():
    a = rand_init(Box(0, 0, 100, 100), np.random.default_rng(3))
    b = rand_init(Box(0, 0, 100, 100), np.random.default_rng(3))
    assert (a.x, a.y) == (b.x, b.y)


# --- fused cost ---------------------------------------------------------------

def _small_map():
    raw = []
    for i, (x, y) in enumerate([(10, 10), (40, 20), (70, 80)]):
        p = Position(float(x), float(y))
        raw.append((p, PositionLabel(p), "BS1", -50.0 - 7 * i))
        raw.append((p, PositionLabel(p), "BS2", -60.0 - 3 * i))
    return build_map(raw)


@given(st.floats(min_value=-80, max_value=-40),
       st.floats(min_value=0, max_value=100), st.floats(min_value=0, max_value=100))
@settings(max_examples=30)
def test_fused_cost_with_zero_weight_equals_mle_cost(dl, x, y):
    fmap = _small_map()
    meas = noisy(RX4, Position(30, 40), sigma=4.0, seed=2)
    theta = UnknownVector(Position(x, y), -31.0)
    assert fp_mle_cost(theta, meas, BETA, {"BS1": dl}, fmap, 0.0) == \
        mle_cost(theta, meas, BETA)


def test_fused_cost_zero_at_matching_map_point():
    fmap = _small_map()
    entry = fmap.entries[1]
    truth = entry.position
    meas = noiseless(RX4, truth)
    theta = UnknownVector(truth, -30.0)
    cost = fp_mle_cost(theta, meas, BETA, dict(entry.rss), fmap, 0.01)
    assert cost == pytest.approx(0.0, abs=1e-18)


def test_fused_cost_weights_single_station_residual():
    fmap = _small_map()
    entry = fmap.entries[0]
    theta = UnknownVector(entry.position, -30.0)
    meas = noiseless(RX4, entry.position)
    base = mle_cost(theta, meas, BETA)
    dl = {"BS1": entry.rss["BS1"] + 10.0}  # 10 dB residual on one station
    cost = fp_mle_cost(theta, meas, BETA, dl, fmap, 0.01)
    assert cost - base == pytest.approx(0.01 * 100.0)


# --- SDP ----------------------------------------------------------------------

def test_sdp_zero_cost_certificate_on_noiseless_input():
    truth = Position(30, 40)
    sol = solve_sdp_init(noiseless(RX4, truth), BETA)
    assert sol.cost <= 1e-9
    assert sol.z - (sol.x.x ** 2 + sol.x.y ** 2) >= -1e-6
    assert distance(sol.x, truth) < 0.1


def test_sdp_h_identities_hold_exactly():
    truth = Position(140, 60)
    meas = noisy(RX3, truth, sigma=4.0, seed=5, beta=BETA)
    sol = solve_sdp_init(meas, BETA)
    for (r, _), h in zip(meas, sol.h):
        expected = r.x ** 2 + r.y ** 2 - 2 * (r.x * sol.x.x + r.y * sol.x.y) + sol.z
        assert h == pytest.approx(expected, rel=1e-12)
        assert h >= -1e-6
    assert sol.alpha > 0


def test_sdp_feasible_on_random_noisy_instances():
    rng = np.random.default_rng(2)
    for trial in range(1000):
        n = int(rng.integers(3, 8))
        rx = [Position(float(a), float(b)) for a, b in rng.uniform(0, 200, (n, 2))]
        truth = Position(float(rng.uniform(0, 200)), float(rng.uniform(0, 200)))
        meas = noisy(rx, truth, sigma=4.0, seed=trial)
        sol = solve_sdp_init(meas, BETA)
        assert sol.z - (sol.x.x ** 2 + sol.x.y ** 2) >= -1e-6


def test_sdp_cost_dominates_true_parameter_candidate():
    rng = np.random.default_rng(31)
    for trial in range(50):
        truth = Position(float(rng.uniform(0, 200)), float(rng.uniform(0, 200)))
        meas = noisy(RX3, truth, sigma=4.0, seed=1000 + trial)
        sol = solve_sdp_init(meas, BETA)
        alpha_true = 10.0 ** (-30.0 / (5 * BETA))
        candidate = sum(
            (distance(truth, r) ** 2 * 10.0 ** (v / (5 * BETA)) - alpha_true) ** 2
            for r, v in meas)
        # The solver is optimal up to its duality gap.
        assert sol.cost <= candidate + 1e-9


def test_sdp_single_receiver_raises_with_best_iterate():
    meas = [(Position(10, 10), -70.0)]
    with pytest.raises(SdpNonConvergence) as exc:
        solve_sdp_init(meas, BETA)
    assert exc.value.best.cost >= 0.0


# --- localize ------------------------------------------------------------------

def _cfg(bounds=Box(0, 0, 100, 100), **kw):
    defaults = dict(beta=BETA, bounds=bounds, resolution=1.0,
                    half_widths={"rand": 150.0, "sdp": 15.0, "fp": 15.0},
                    knn_k=1, fused_weight=0.01)
    defaults.update(kw)
    return LocalizerConfig(**defaults)


def test_localize_fp_noiseless_with_map_point_at_truth():
    truth = Position(30, 40)
    dl_model = PathLossModel(-35.0, 2.5, 0.0)
    bs = Position(120, 130)
    raw = []
    for x, y in [(30, 40), (10, 10), (80, 20), (50, 90)]:
        p = Position(float(x), float(y))
        raw.append((p, PositionLabel(p), "BS1", expected_rss(dl_model, bs, p)))
    fmap = build_map(raw)
    meas = noiseless(RX4, truth)
    dl = {"BS1": expected_rss(dl_model, bs, truth)}
    res = localize("fp", meas, dl, _cfg(), fmap=fmap)
    assert distance(res.estimate, truth) <= math.sqrt(2) / 2
    assert res.init_label == PositionLabel(truth)


def test_localize_sdp_noiseless_good_geometry():
    truth = Position(30, 40)
    res = localize("sdp", noiseless(RX4, truth), {}, _cfg())
    assert distance(res.estimate, truth) <= math.sqrt(2) / 2
    assert res.cost == pytest.approx(0.0, abs=1e-9)


def test_localize_rand_is_reproducible():
    truth = Position(30, 40)
    meas = noisy(RX4, truth, sigma=4.0, seed=77)
    a = localize("rand", meas, {}, _cfg(), rng=np.random.default_rng(5))
    b = localize("rand", meas, {}, _cfg(), rng=np.random.default_rng(5))
    assert a == b


def test_localize_fp_category_label_searches_polygon():
    truth = Position(30, 40)
    region = PolygonRegion(((20, 30), (45, 30), (45, 52), (20, 52)))
    dl_model = PathLossModel(-35.0, 2.5, 0.0)
    bs = Position(120, 130)
    raw = []
    for x, y in [(30, 40), (25, 35), (70, 70), (75, 75)]:
        p = Position(float(x), float(y))
        label = CategoryLabel("inner" if x < 50 else "outer",
                              region if x < 50 else
                              PolygonRegion(((60, 60), (90, 60), (90, 90), (60, 90))))
        raw.append((p, label, "BS1", expected_rss(dl_model, bs, p)))
    fmap = build_map(raw)
    res = localize("fp", noiseless(RX4, truth),
                   {"BS1": expected_rss(dl_model, bs, truth)}, _cfg(), fmap=fmap)
    assert res.init_label.name == "inner"
    assert region.contains(res.estimate)
    assert distance(res.estimate, truth) <= math.sqrt(2) / 2


def test_localize_sdp_out_of_bounds_init_is_clamped():
    # Clustered receivers push the SDP estimate far out; the search box must
    # be clamped into the bounds and still return an in-bounds estimate.
    bounds = Box(0, 0, 100, 100)
    rxs = (Position(1, 99), Position(3, 97), Position(2, 95))
    meas = noisy(rxs, Position(80, 20), sigma=6.0, seed=123)
    res = localize("sdp", meas, {}, _cfg(bounds=bounds))
    assert bounds.contains(res.estimate)


def test_localize_requires_strategy_inputs():
    meas = noiseless(RX4, Position(30, 40))
    with pytest.raises(ValueError):
        localize("rand", meas, {}, _cfg())  # no rng
    with pytest.raises(ValueError):
        localize("fp", meas, {"BS1": -60.0}, _cfg())  # no map
    with pytest.raises(ValueError):
        localize("nope", meas, {}, _cfg())
