"""A priori quantities, identities and convergence orders on computed trajectories."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .fem import Space, gauss_rule
from .interpolants import (PiecewiseLinearTrack, bar_track, bvq_seminorm_dual, derivative_dual_norms,
                           eval_hat, hat_bar_gap, hat_track)
from .operators import slab_average_f, slab_operator
from .stepper import Problem, TrajectorySolution


@dataclass
class AprioriReport:
    max_h2: float
    max_h2_from0: float
    sum_v_p: float
    increment_sum: float
    lhs_lemma42: float
    sums_lemma43: dict
    data_constant: float
    bvq_bar: float
    hat_bar_gap: tuple
    u0_v_growth: float

    def as_dict(self) -> dict:
        return asdict(self)


def apriori(traj: TrajectorySolution, problem: Problem, with_bvq: bool = True) -> AprioriReport:
    """Energy-estimate quantities of a solved trajectory.

    ``data_constant`` = 1 + ||u0||_H^2 + sum tau ||f_k||_*^q + ||g||_{L^1}: the
    shape of the data dependence only, with unit constant.
    """
    space, grid, theta = problem.space, traj.grid, traj.theta
    taus, q, p = grid.taus, space.q, space.p
    states, mids = traj.states, traj.mids
    max_h2 = max(space.h_norm(u) ** 2 for u in states[1:])
    sum_v_p = float(sum(t * space.v_norm_p(w) for t, w in zip(taus, mids)))
    incs = np.diff(states, axis=0)
    increment_sum = (2.0 * theta - 1.0) * float(sum(space.h_norm(d) ** 2 for d in incs))
    sum_A = sum_xi = sum_f = 0.0
    for k in range(1, grid.count + 1):
        tau = taus[k - 1]
        A_k = slab_operator(problem.operator, space, grid, k)
        sum_A += tau * space.dual_norm(A_k(mids[k - 1])) ** q
        sum_xi += tau * space.dual_norm(space.iota_adjoint(traj.selections[k - 1])) ** q
        sum_f += tau * space.dual_norm(slab_average_f(problem.source, space, grid, k)) ** q
    hat = hat_track(traj)
    sum_der = float(np.dot(taus, derivative_dual_norms(hat, space) ** q))
    g_l1 = 0.0
    if problem.growth is not None and problem.growth.case == "B":
        xr, wr = gauss_rule(5)
        g_l1 = float(sum(tau * w * abs(problem.growth.g(a + tau * x))
                         for a, tau in zip(grid.points[:-1], taus) for x, w in zip(xr, wr)))
    data_constant = 1.0 + space.h_norm(states[0]) ** 2 + sum_f + g_l1
    return AprioriReport(
        max_h2=max_h2,
        max_h2_from0=max(max_h2, space.h_norm(states[0]) ** 2),
        sum_v_p=sum_v_p,
        increment_sum=increment_sum,
        lhs_lemma42=max_h2 + sum_v_p + increment_sum,
        sums_lemma43={"A": float(sum_A), "xi": float(sum_xi), "derivative": sum_der},
        data_constant=float(data_constant),
        bvq_bar=bvq_seminorm_dual(bar_track(traj), space) if with_bvq else float("nan"),
        hat_bar_gap=hat_bar_gap(hat, theta, space),
        u0_v_growth=space.v_norm(states[0]) * grid.tau_max ** (1.0 / p),
    )


def algebraic_identity_check(a, b, theta):
    """|(a-b)(theta a + (1-theta) b) - (a^2 - b^2 + (2theta-1)(a-b)^2)/2| (vectorized)."""
    a, b, theta = (np.asarray(x, dtype=float) for x in (a, b, theta))
    lhs = (a - b) * (theta * a + (1.0 - theta) * b)
    rhs = 0.5 * (a * a - b * b + (2.0 * theta - 1.0) * (a - b) ** 2)
    return np.abs(lhs - rhs)


def observed_order(errors, tau_maxes) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(tau_max), and the RMS fit residual."""
    e = np.asarray(errors, dtype=float)
    t = np.asarray(tau_maxes, dtype=float)
    if len(e) != len(t) or len(e) < 3:
        raise ValueError("need at least three (error, tau) pairs")
    if np.any(e <= 0) or np.any(t <= 0):
        raise ValueError("errors and step sizes must be positive")
    X, Y = np.log(t), np.log(e)
    slope, icept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + icept)
    return float(slope), float(np.sqrt(np.mean(resid ** 2)))


# -- references -------------------------------------------------------------

class ExactReference:
    """Closed-form u(t, x)."""

    kind = "exact"

    def __init__(self, u: Callable):
        self.u = u

    def h_distance(self, space: Space, c, t: float) -> float:
        return space.h_error(c, lambda x: self.u(t, x))

    def coefficients(self, space: Space, t: float) -> np.ndarray:
        """Nodal interpolant at the free nodes."""
        if space.mesh is None:
            return np.asarray(self.u(t, np.zeros(1)), dtype=float)
        return np.asarray(self.u(t, space.mesh.nodes[space.mesh.free]), dtype=float)


class TrajectoryReference:
    """Piecewise linear interpolant of a (finer) computed trajectory on the same mesh."""

    kind = "fine-grid"

    def __init__(self, hat: PiecewiseLinearTrack, note: str = ""):
        self.hat, self.note = hat, note

    def h_distance(self, space: Space, c, t: float) -> float:
        return space.h_norm(np.asarray(c) - eval_hat(self.hat, t))

    def coefficients(self, space: Space, t: float) -> np.ndarray:
        return eval_hat(self.hat, t)


def pointwise_h_error(hat: PiecewiseLinearTrack, reference, times, space: Space) -> float:
    """max over ``times`` of ||hat(t) - u_ref(t)||_H."""
    return max(reference.h_distance(space, eval_hat(hat, t), t) for t in times)


def error_times(grid, eps_offset: float = 0.0) -> np.ndarray:
    """Grid times t^1..t^N, dropping those before ``eps_offset``."""
    pts = grid.points[1:]
    return pts[pts >= eps_offset]


@dataclass
class GridErrors:
    pointwise_H: float
    L2_H: float
    Lp_V_bar: float


def trajectory_errors(traj: TrajectorySolution, reference, space: Space,
                      eps_offset: float = 0.0) -> GridErrors:
    grid = traj.grid
    hat = hat_track(traj)
    xr, wr = gauss_rule(3)
    l2 = lp = 0.0
    p = space.p
    for k in range(1, grid.count + 1):
        a, b = grid.slab(k)
        tau = b - a
        for x, w in zip(xr, wr):
            t = a + tau * x
            if t < eps_offset:
                continue
            l2 += tau * w * reference.h_distance(space, eval_hat(hat, t), t) ** 2
            lp += tau * w * space.v_norm_p(traj.mids[k - 1] - reference.coefficients(space, t))
    return GridErrors(
        pointwise_H=pointwise_h_error(hat, reference, error_times(grid, eps_offset), space),
        L2_H=float(np.sqrt(l2)),
        Lp_V_bar=float(lp ** (1.0 / p)),
    )


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    orders: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def add(self, row: dict):
        self.rows.append(row)

    def finalize(self, error_keys=("pointwise_H", "L2_H", "Lp_V_bar")):
        if len(self.rows) < 3:
            self.warnings.append(f"only {len(self.rows)} grid(s): observed orders omitted")
            return self
        taus = [r["grid"]["tau_max"] for r in self.rows]
        for key in error_keys:
            errs = [r["errors"][key] for r in self.rows]
            if min(errs) > 0:
                slope, resid = observed_order(errs, taus)
                self.orders[key] = {"order": slope, "fit_residual": resid}
        return self


def uniformity_ratios(reports: list[AprioriReport]) -> dict:
    """max/min across a family for each a priori quantity (all-zero families count as 1)."""
    def ratio(vals):
        vals = np.asarray(vals, dtype=float)
        if np.all(vals == 0):
            return 1.0
        if vals.min() <= 0:
            return float("inf")
        return float(vals.max() / vals.min())

    out = {"lhs_lemma42": ratio([r.lhs_lemma42 for r in reports])}
    for key in ("A", "xi", "derivative"):
        out[key] = ratio([r.sums_lemma43[key] for r in reports])
    return out
