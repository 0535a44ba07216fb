import numpy as np
import pytest

from conftest import scalar_problem
from oracles import bvq_brute
from theta_incl.fem import SpatialMesh, interval_space, scalar_space
from theta_incl.interpolants import (PiecewiseConstantTrack, PiecewiseLinearTrack, bar_track,
                                     bbb_identity, bvq_seminorm, bvq_seminorm_dual, clement_project,
                                     eval_bar, eval_hat, hat_bar_gap, hat_derivative, hat_track,
                                     l2_time_error, norm_Linf_H, norm_Lp_V, norm_Lq_Vstar_dt)
from theta_incl.stepper import ThetaConfig, solve_trajectory
from theta_incl.time_grid import TimeGrid, build_random_regular, build_uniform
from theta_incl.diagnostics import observed_order

SCALAR = scalar_space()


def scalar_track(vals, taus=None):
    grid = TimeGrid.from_taus(taus or [1.0] * (len(vals) - 1))
    return PiecewiseLinearTrack(grid, np.array(vals, dtype=float)[:, None])


def test_eval_hat_nodes_and_midpoint():
    hat = scalar_track([0.0, 1.0, 3.0])
    for k, t in enumerate(hat.grid.points):
        assert eval_hat(hat, t)[0] == hat.states[k][0]
    assert eval_hat(hat, 0.5)[0] == 0.5
    assert hat_derivative(hat, 1.0)[0] == 2.0
    assert hat_derivative(hat, 2.0)[0] == 2.0


def test_eval_bar_at_zero():
    traj = solve_trajectory(ThetaConfig(theta=0.5), scalar_problem(), build_uniform(1.0, 4), np.ones(1))
    assert eval_bar(bar_track(traj), 0.0)[0] == traj.mids[0][0]


def test_clement_constant_and_linear():
    grid = build_uniform(1.0, 8)
    assert np.allclose(clement_project(lambda t: np.array([2.5]), grid).values, 2.5)
    track = clement_project(lambda t: np.array([t]), grid)
    assert np.allclose(track.values[:, 0], grid.points[:-1] + 0.0625, rtol=1e-14)


def test_clement_identity_on_slab_constants():
    grid = build_random_regular(1.0, 6, 2.0, 1)
    vals = np.random.default_rng(0).normal(size=(6, 2))
    track = PiecewiseConstantTrack(grid, vals)
    proj = clement_project(lambda t: eval_bar(track, t), grid)
    assert np.allclose(proj.values, vals, rtol=1e-14)


def test_clement_error_linear():
    for N in (4, 8, 16):
        grid = build_uniform(1.0, N)
        err = l2_time_error(lambda t: np.array([t]), clement_project(lambda t: np.array([t]), grid))
        assert err == pytest.approx((1.0 / N) / (2.0 * np.sqrt(3.0)), rel=1e-12)


def test_norms_zero_and_one_slab():
    sp = interval_space(SpatialMesh.uniform(1.0, 6), 2.0)
    grid = build_uniform(1.0, 3)
    zero = PiecewiseLinearTrack(grid, np.zeros((4, sp.n)))
    assert norm_Lq_Vstar_dt(zero, sp) == 0.0 and norm_Linf_H(zero, sp) == 0.0
    one = PiecewiseConstantTrack(TimeGrid.from_taus([0.5]), np.array([[2.0]]))
    assert norm_Lp_V(one, SCALAR) == pytest.approx(np.sqrt(2.0))


def test_bvq_examples():
    grid = build_uniform(3.0, 3)
    assert bvq_seminorm(PiecewiseConstantTrack(grid, np.array([0.0, 1.0, 3.0])), 2.0, abs) == 9.0
    assert bvq_seminorm(PiecewiseConstantTrack(grid, np.array([0.0, 1.0, 0.0])), 2.0, abs) == 2.0
    assert bvq_seminorm(PiecewiseConstantTrack(grid, np.ones(3)), 2.0, abs) == 0.0


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0, 3.0])
def test_bvq_against_brute_force(q):
    rng = np.random.default_rng(int(q * 10))
    for _ in range(20):
        n = int(rng.integers(1, 10))
        vals = rng.normal(size=n)
        track = PiecewiseConstantTrack(build_uniform(1.0, n), vals)
        assert bvq_seminorm(track, q, abs) == pytest.approx(bvq_brute(vals, q), rel=1e-12, abs=0)


def test_bvq_dual_fast_path_matches_generic():
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 2.0)
    rng = np.random.default_rng(3)
    track = PiecewiseConstantTrack(build_uniform(1.0, 7), rng.normal(size=(7, sp.n)))
    generic = bvq_seminorm(track, 2.0, lambda d: sp.dual_norm(sp.mass @ d))
    assert bvq_seminorm_dual(track, sp) == pytest.approx(generic, rel=1e-10)


def test_bbb_worked_example():
    hat = scalar_track([0.0, 1.0, 3.0])
    bar = PiecewiseConstantTrack(hat.grid, hat.states[1:])
    lhs, rhs, res = bbb_identity(hat, bar, 1.0, lambda a, b: float(a @ b))
    assert rhs == -2.5
    # closed form per slab: int_0^1 d*(s-1)*d ds = -d^2/2
    assert lhs == pytest.approx(-0.5 - 2.0, abs=1e-12) and res <= 1e-12


def test_bbb_constant_and_crank_nicolson():
    hat = scalar_track([2.0, 2.0, 2.0])
    assert bbb_identity(hat, PiecewiseConstantTrack(hat.grid, hat.states[1:]), 1.0,
                        lambda a, b: float(a @ b))[:2] == (0.0, 0.0)
    hat = scalar_track([0.0, 1.0, 3.0, -1.0], [0.2, 0.5, 0.3])
    mids = 0.5 * (hat.states[1:] + hat.states[:-1])
    lhs, rhs, _ = bbb_identity(hat, PiecewiseConstantTrack(hat.grid, mids), 0.5, lambda a, b: float(a @ b))
    assert rhs == 0.0 and abs(lhs) <= 1e-12


def test_hat_bar_gap_bound():
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 2.0)
    rng = np.random.default_rng(9)
    grid = build_random_regular(1.0, 10, 2.0, 4)
    hat = PiecewiseLinearTrack(grid, rng.normal(size=(11, sp.n)))
    for theta in (0.5, 0.75, 1.0):
        value, bound = hat_bar_gap(hat, theta, sp)
        assert 0 < value <= bound * (1 + 1e-12)


def test_hat_bar_gap_by_quadrature():
    sp = interval_space(SpatialMesh.uniform(1.0, 4), 2.0)
    rng = np.random.default_rng(1)
    grid = TimeGrid.from_taus([0.3, 0.7])
    hat = PiecewiseLinearTrack(grid, rng.normal(size=(3, sp.n)))
    theta = 0.7
    bar = PiecewiseConstantTrack(grid, theta * hat.states[1:] + (1 - theta) * hat.states[:-1])
    ts = np.linspace(0, 1, 200001)[1:-1]
    vals = [sp.dual_norm(sp.mass @ (eval_hat(hat, t) - eval_bar(bar, t))) ** 2 for t in ts[::100]]
    approx = np.trapezoid(vals, ts[::100])
    assert hat_bar_gap(hat, theta, sp)[0] == pytest.approx(approx, rel=1e-3)


def test_clement_sine_order_random_grids():
    v = lambda t: np.array([np.sin(2 * np.pi * t)])
    grids = [build_random_regular(1.0, N, 2.0, 11 + i) for i, N in enumerate((8, 16, 32, 64))]
    errs = [l2_time_error(v, clement_project(v, g)) for g in grids]
    slope, _ = observed_order(errs, [g.tau_max for g in grids])
    assert abs(slope - 1.0) <= 0.2


def test_track_length_checks():
    with pytest.raises(ValueError):
        PiecewiseConstantTrack(build_uniform(1.0, 3), np.zeros(2))
    with pytest.raises(ValueError):
        PiecewiseLinearTrack(build_uniform(1.0, 3), np.zeros(3))


def test_traj_tracks():
    traj = solve_trajectory(ThetaConfig(theta=0.5), scalar_problem(), build_uniform(1.0, 4), np.ones(1))
    assert hat_track(traj).states is traj.states
