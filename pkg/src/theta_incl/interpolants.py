"""Piecewise constant / linear interpolants of a trajectory, slab means, and BV^q seminorms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fem import Space, gauss_rule
from .time_grid import TimeGrid, slab_of


@dataclass(frozen=True)
class PiecewiseConstantTrack:
    """Value ``values[k-1]`` on (t^{k-1}, t^k]; the value at t = 0 is ``values[0]``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != self.grid.count:
            raise ValueError("need one value per slab")


@dataclass(frozen=True)
class PiecewiseLinearTrack:
    grid: TimeGrid
    states: np.ndarray

    def __post_init__(self):
        if len(self.states) != self.grid.count + 1:
            raise ValueError("need one state per grid point")


def bar_track(traj) -> PiecewiseConstantTrack:
    return PiecewiseConstantTrack(traj.grid, traj.mids)


def hat_track(traj) -> PiecewiseLinearTrack:
    return PiecewiseLinearTrack(traj.grid, traj.states)


def eta_track(traj, space: Space) -> PiecewiseConstantTrack:
    """Slab values iota^* xi^k as dual vectors."""
    return PiecewiseConstantTrack(traj.grid, np.array([space.iota_adjoint(x) for x in traj.selections]))


def eval_bar(track: PiecewiseConstantTrack, t: float):
    return track.values[slab_of(track.grid, t) - 1]


def eval_hat(track: PiecewiseLinearTrack, t: float):
    k = slab_of(track.grid, t)
    a, b = track.grid.slab(k)
    if t == b:
        return track.states[k]
    s = (t - a) / (b - a)
    return track.states[k - 1] + s * (track.states[k] - track.states[k - 1])


def hat_derivative(track: PiecewiseLinearTrack, t: float):
    """Slab difference quotient; grid points use the slab to their right (left at T)."""
    grid = track.grid
    if not 0.0 <= t <= grid.horizon:
        raise ValueError(f"time {t} outside [0, {grid.horizon}]")
    k = min(int(np.searchsorted(grid.points, t, side="right")), grid.count)
    return (track.states[k] - track.states[k - 1]) / grid.taus[k - 1]


# -- slab means -------------------------------------------------------------

def clement_project(v: Callable, grid: TimeGrid) -> PiecewiseConstantTrack:
    """Slab means of t -> v(t) by 3-point Gauss per slab."""
    xr, wr = gauss_rule(3)
    values = []
    for k in range(1, grid.count + 1):
        a, b = grid.slab(k)
        values.append(sum(w * np.asarray(v(a + (b - a) * x), dtype=float) for x, w in zip(xr, wr)))
    return PiecewiseConstantTrack(grid, np.array(values))


def l2_time_error(v: Callable, track: PiecewiseConstantTrack, inner: Callable | None = None,
                  nodes: int = 10) -> float:
    """||v - track||_{L^2(0,T;X)} by Gauss quadrature per slab (X-inner product ``inner``)."""
    xr, wr = gauss_rule(nodes)
    inner = inner or (lambda a, b: float(np.sum(np.asarray(a) * np.asarray(b))))
    total = 0.0
    grid = track.grid
    for k in range(1, grid.count + 1):
        a, b = grid.slab(k)
        for x, w in zip(xr, wr):
            d = np.asarray(v(a + (b - a) * x), dtype=float) - track.values[k - 1]
            total += (b - a) * w * inner(d, d)
    return float(np.sqrt(total))


# -- trajectory norms -------------------------------------------------------

def _same_grid(*tracks):
    first = tracks[0].grid
    for tr in tracks[1:]:
        if tr.grid is not first and not np.array_equal(tr.grid.points, first.points):
            raise ValueError("tracks live on different grids")


def norm_Lp_V(track: PiecewiseConstantTrack, space: Space) -> float:
    taus = track.grid.taus
    return float(sum(t * space.v_norm_p(w) for t, w in zip(taus, track.values)) ** (1.0 / space.p))


def norm_Linf_H(track, space: Space) -> float:
    vals = track.values if isinstance(track, PiecewiseConstantTrack) else track.states
    return max(space.h_norm(v) for v in vals)


def derivative_dual_norms(hat: PiecewiseLinearTrack, space: Space) -> np.ndarray:
    """||M (u^k - u^{k-1})/tau^k||_{V*} per slab."""
    diffs = np.diff(hat.states, axis=0) / hat.grid.taus[:, None]
    return np.array([space.dual_norm(space.mass @ d) for d in diffs])


def norm_Lq_Vstar_dt(hat: PiecewiseLinearTrack, space: Space) -> float:
    q = space.q
    return float(np.dot(hat.grid.taus, derivative_dual_norms(hat, space) ** q) ** (1.0 / q))


# -- BV^q -------------------------------------------------------------------

def bvq_seminorm(track: PiecewiseConstantTrack, q: float, norm: Callable) -> float:
    """sup over partitions of sum ||x(b_i) - x(a_i)||^q for a slabwise constant track.

    The supremum is attained on chains of slab values, so a dynamic program
    over increasing index chains is exact: best[j] = max(0, max_{i<j}
    best[i] + ||w^j - w^i||^q).
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    vals = track.values
    n = len(vals)
    best = np.zeros(n)
    for j in range(1, n):
        cand = [best[i] + norm(vals[j] - vals[i]) ** q for i in range(j)]
        best[j] = max(0.0, max(cand))
    return float(best.max())


def bvq_seminorm_dual(track: PiecewiseConstantTrack, space: Space) -> float:
    """BV^q(0,T;V*) seminorm of a V-valued track embedded through the H pairing."""
    q = space.q
    if space.p == 2.0:
        # ||M d||_* = ||L^{-1} M d|| with gram = L L^T; distances become Euclidean
        Y = np.array([space.mass @ w for w in track.values])
        Z = np.array([space.riesz(y) for y in Y])
        gram_dist = lambda i, j: np.sqrt(max(np.dot(Y[j] - Y[i], Z[j] - Z[i]), 0.0))
        n = len(Y)
        best = np.zeros(n)
        for j in range(1, n):
            best[j] = max(0.0, max(best[i] + gram_dist(i, j) ** q for i in range(j)))
        return float(best.max())
    return bvq_seminorm(track, q, lambda d: space.dual_norm(space.mass @ d))


# -- identities -------------------------------------------------------------

def bbb_identity(hat: PiecewiseLinearTrack, bar: PiecewiseConstantTrack, theta: float,
                 inner: Callable) -> tuple[float, float, float]:
    """(hat', hat - bar) over (0, T) against -(2theta-1)/2 sum ||u^k - u^{k-1}||^2.

    The left side is integrated slab by slab with 2-point Gauss, exact for
    the affine integrand.
    """
    _same_grid(hat, bar)
    grid = hat.grid
    xr, wr = gauss_rule(2)
    lhs = 0.0
    for k in range(1, grid.count + 1):
        a, b = grid.slab(k)
        tau = b - a
        deriv = (hat.states[k] - hat.states[k - 1]) / tau
        for x, w in zip(xr, wr):
            u = hat.states[k - 1] + x * (hat.states[k] - hat.states[k - 1])
            lhs += tau * w * inner(deriv, u - bar.values[k - 1])
    incs = np.diff(hat.states, axis=0)
    rhs = -(2.0 * theta - 1.0) / 2.0 * sum(inner(d, d) for d in incs)
    return float(lhs), float(rhs), abs(lhs - rhs)


def hat_bar_gap(hat: PiecewiseLinearTrack, theta: float, space: Space) -> tuple[float, float]:
    """||hat - bar||^q_{L^q(V*)} and its bound (tau_max^q/(q+1)) sum tau ||du/tau||^q_*.

    On a slab hat - bar = (s - theta)(u^k - u^{k-1}), s in [0, 1], so the exact
    value carries the factor (theta^{q+1} + (1-theta)^{q+1})/(q+1).
    """
    q = space.q
    taus = hat.grid.taus
    dn = derivative_dual_norms(hat, space)
    factor = (theta ** (q + 1) + (1.0 - theta) ** (q + 1)) / (q + 1)
    value = float(np.sum(taus * (taus * dn) ** q * factor))
    bound = float(taus.max() ** q / (q + 1) * np.sum(taus * dn ** q))
    return value, bound
