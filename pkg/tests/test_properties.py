import numpy as np
from hypothesis import given, settings, strategies as st

from oracles import bvq_brute
from theta_incl.diagnostics import algebraic_identity_check
from theta_incl.fem import SpatialMesh, interval_space
from theta_incl.interpolants import (PiecewiseConstantTrack, PiecewiseLinearTrack, bbb_identity,
                                     bvq_seminorm, clement_project, eval_bar)
from theta_incl.multifunction import graph_distance, graph_from_config, interval_at, regularize
from theta_incl.time_grid import TimeGrid, build_random_regular, regularity

finite = st.floats(-1e3, 1e3, allow_nan=False)
theta_st = st.floats(0.5, 1.0)
SPACE3 = interval_space(SpatialMesh.uniform(1.0, 4), 3.0)  # 5 nodes, 3 free


@given(finite, finite, theta_st)
def test_algebraic_identity(a, b, theta):
    assert algebraic_identity_check(a, b, theta) <= 1e-12 * (1 + a * a + b * b)


@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=20), theta_st, st.integers(0, 2 ** 32 - 1))
def test_bbb_residual(taus, theta, seed):
    grid = TimeGrid.from_taus(taus)
    states = np.random.default_rng(seed).normal(size=(len(taus) + 1, 3))
    hat = PiecewiseLinearTrack(grid, states)
    bar = PiecewiseConstantTrack(grid, theta * states[1:] + (1 - theta) * states[:-1])
    lhs, rhs, res = bbb_identity(hat, bar, theta, lambda x, y: float(x @ y))
    assert res <= 1e-12 * (1 + abs(rhs))


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=9), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_bvq_matches_brute(vals, q):
    track = PiecewiseConstantTrack(TimeGrid.from_taus([1.0] * len(vals)), np.array(vals))
    assert abs(bvq_seminorm(track, q, abs) - bvq_brute(vals, q)) <= 1e-12 * (1 + bvq_brute(vals, q))


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.floats(-5, 5), st.sampled_from([1.0, 2.0, 3.0]))
def test_bvq_monotone_under_extension(vals, extra, q):
    a = PiecewiseConstantTrack(TimeGrid.from_taus([1.0] * len(vals)), np.array(vals))
    b = PiecewiseConstantTrack(TimeGrid.from_taus([1.0] * (len(vals) + 1)), np.array(vals + [extra]))
    assert bvq_seminorm(b, q, abs) >= bvq_seminorm(a, q, abs)


@given(st.integers(1, 30), st.floats(1.0, 4.0), st.integers(0, 10 ** 6))
def test_random_grid_regularity(N, K, seed):
    grid = build_random_regular(2.0, N, K, seed)
    reg = regularity(grid)
    assert grid.count == N and grid.points[-1] == 2.0
    assert reg.K_observed <= K * (1 + 1e-12)


@settings(max_examples=30)
@given(st.integers(1, 10), st.integers(0, 10 ** 6))
def test_clement_identity(N, seed):
    grid = build_random_regular(1.0, N, 2.0, seed)
    vals = np.random.default_rng(seed).normal(size=(N, 2))
    track = PiecewiseConstantTrack(grid, vals)
    assert np.allclose(clement_project(lambda t: eval_bar(track, t), grid).values, vals, rtol=1e-13)


@given(st.floats(-3, 3), st.floats(0, 1), st.floats(0, 1))
def test_interval_convexity(s, t, lam):
    g = graph_from_config({"branches": "sawtooth", "jumps": [-1.0, 0.0, 1.0], "modulation": "1+cos"})
    lo, hi = interval_at(g, t, np.array([s]))
    mix = lam * lo + (1 - lam) * hi
    tol = 1e-15 * (1 + abs(hi[0]))
    assert lo[0] - tol <= mix[0] <= hi[0] + tol


@given(st.floats(-2, 2), st.floats(1e-4, 0.2))
def test_surrogate_within_eps_of_graph(s, eps):
    g = graph_from_config({"branches": "cubic_jump", "jumps": [-0.5, 0.5], "coeff": 1.0})
    y = regularize(g, eps).value(np.array([s]))[0]
    assert graph_distance(g, s, y, 2 * eps) <= eps * (1 + 1e-9)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.floats(0.1, 10))
def test_v_norm_homogeneous(v, c):
    v = np.array(v)
    assert np.isclose(SPACE3.v_norm(c * v), c * SPACE3.v_norm(v), rtol=1e-12, atol=1e-300)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.integers(0, 10 ** 6))
def test_dual_norm_dominates_pairings(g, seed):
    g = np.array(g)
    val = SPACE3.dual_norm(g)
    for v in np.random.default_rng(seed).normal(size=(50, 3)):
        assert abs(g @ v) <= val * SPACE3.v_norm(v) * (1 + 1e-8) + 1e-300
