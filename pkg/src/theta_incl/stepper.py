"""The theta-scheme time march.

Each step is solved for the intermediate state w = theta*u^k + (1-theta)*u^{k-1}:

    M w/(theta*tau) + A_k(w) + iota^* F_k(iota w) = M u^{k-1}/(theta*tau) + f_k,

with F_k replaced by its ramp-regularized surrogate of width eps_k. The
recorded selection is the surrogate value clamped onto the exact interval.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import ConvergenceError, Space
from .multifunction import (FilledGraph, GrowthParams, graph_distance, regularize,
                            slab_mean_modulation)
from .operators import OperatorSpec, SourceSpec, slab_average_f, slab_operator
from .time_grid import TimeGrid

log = logging.getLogger(__name__)


class NonConvergence(ConvergenceError):
    def __init__(self, message: str, slab: int | None = None):
        super().__init__(message if slab is None else f"slab {slab}: {message}")
        self.slab = slab


class InadmissibleStep(ValueError):
    def __init__(self, slab: int, tau: float, tau0: float):
        super().__init__(f"slab {slab}: step {tau:.6g} exceeds the admissible threshold {tau0:.6g}")
        self.slab, self.tau, self.tau0 = slab, tau, tau0


@dataclass(frozen=True)
class ThetaConfig:
    theta: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    damping_floor: float = 2.0 ** -20
    eps_min: float = 1e-8
    c_eps: float = 0.5
    picard_fallback: bool = True
    picard_max_iter: int = 200
    strict_admissibility: bool = False

    def __post_init__(self):
        if self.theta == 0:
            raise ValueError("theta = 0 (explicit Euler) is excluded")
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.newton_tol > 0 or self.newton_max_iter < 1:
            raise ValueError("invalid Newton settings")

    def epsilon(self, tau: float) -> float:
        return max(self.eps_min, self.c_eps * tau)


@dataclass(frozen=True)
class Problem:
    """Data of one inclusion u' + A(t,u) + iota^* F(t, iota u) ∋ f on (0, T)."""

    space: Space
    operator: OperatorSpec
    source: SourceSpec
    T: float
    graph: FilledGraph | None = None
    growth: GrowthParams | None = None


@dataclass
class StepResult:
    u_k: np.ndarray
    w: np.ndarray
    xi_k: np.ndarray
    zeta_k: np.ndarray
    iterations: int
    residual_dual_norm: float
    clamp_distance: float
    clamp_shift: float
    epsilon: float
    solver: str


@dataclass
class TrajectorySolution:
    grid: TimeGrid
    theta: float
    states: np.ndarray
    mids: np.ndarray
    selections: np.ndarray
    surrogates: np.ndarray
    steps: list = field(default_factory=list)

    @property
    def u0(self) -> np.ndarray:
        return self.states[0]


def admissible_tau0(operator: OperatorSpec, growth: GrowthParams | None, space: Space,
                    theta: float) -> float:
    """Step-size threshold of the existence argument.

    Case A: tau < 1/(theta*(beta + d1*||p||^2)); case B (and no multivalued
    term): tau <= 1/(theta*beta). A zero denominator gives inf.
    """
    denom = operator.beta
    if growth is not None and growth.case == "A":
        denom += growth.d1 * space.p_map_norm ** 2
    return math.inf if denom == 0 else 1.0 / (theta * denom)


def is_admissible(tau: float, tau0: float, growth: GrowthParams | None) -> bool:
    if growth is not None and growth.case == "A":
        return tau < tau0
    return tau <= tau0


class _StepSystem:
    def __init__(self, cfg: ThetaConfig, problem: Problem, grid: TimeGrid, k: int, u_prev):
        space = problem.space
        self.space = space
        a, b = grid.slab(k)
        self.tau = b - a
        self.coef = 1.0 / (cfg.theta * self.tau)
        self.A = slab_operator(problem.operator, space, grid, k)
        self.rhs = self.coef * (space.mass @ u_prev) + slab_average_f(problem.source, space, grid, k)
        self.graph = problem.graph
        self.eps = cfg.epsilon(self.tau)
        if self.graph is not None:
            self.m = slab_mean_modulation(self.graph, grid, k)
            self.sel = regularize(self.graph, self.eps)

    def surrogate(self, w):
        if self.graph is None:
            return np.zeros(self.space.u_dim)
        return self.m * self.sel.value(self.space.iota @ w)

    def residual(self, w, zeta=None):
        if zeta is None:
            zeta = self.surrogate(w)
        out = self.coef * (self.space.mass @ w) + self.A(w) - self.rhs
        if self.graph is not None:
            out = out + self.space.iota_adjoint(zeta)
        return out

    def jacobian(self, w, with_multi=True):
        J = self.coef * self.space.mass + self.A.jacobian(w)
        if with_multi and self.graph is not None:
            iota = self.space.iota
            d = self.space.u_weights * self.m * self.sel.slope(iota @ w)
            J = J + iota.T @ sp.diags(d) @ iota
        return sp.csc_matrix(J)


def _newton(system: _StepSystem, w, cfg: ThetaConfig, dual_norm):
    """Damped Newton on the regularized residual; returns (w, iterations, residual) or None."""
    r = system.residual(w)
    rn = np.linalg.norm(r)
    for it in range(1, cfg.newton_max_iter + 1):
        res = dual_norm(r)
        if res <= cfg.newton_tol:
            return w, it - 1, res
        try:
            d = spla.spsolve(system.jacobian(w), -r)
        except RuntimeError:
            return None
        if not np.all(np.isfinite(d)):
            return None
        step = 1.0
        while True:
            trial = w + step * d
            rt = system.residual(trial)
            rtn = np.linalg.norm(rt)
            if rtn < (1.0 - 1e-4 * step) * rn or rtn == 0.0:
                break
            step *= 0.5
            if step < cfg.damping_floor:
                # stagnation, unless the residual already sits at roundoff
                res = dual_norm(r)
                return (w, it, res) if res <= cfg.newton_tol else None
        w, r, rn = trial, rt, rtn
    res = dual_norm(r)
    return (w, cfg.newton_max_iter, res) if res <= cfg.newton_tol else None


def _picard(system: _StepSystem, w, cfg: ThetaConfig, dual_norm):
    """Lag the multivalued term and solve the remaining smooth problem, with damping."""
    omega = 1.0
    r = system.residual(w)
    res = dual_norm(r)
    for it in range(1, cfg.picard_max_iter + 1):
        if res <= cfg.newton_tol:
            return w, it - 1, res
        zeta = system.surrogate(w)
        inner = w.copy()
        for _ in range(cfg.newton_max_iter):
            ri = system.residual(inner, zeta)
            if dual_norm(ri) <= 0.1 * cfg.newton_tol:
                break
            inner = inner + spla.spsolve(system.jacobian(inner, with_multi=False), -ri)
        while True:
            trial = (1.0 - omega) * w + omega * inner
            res_trial = dual_norm(system.residual(trial))
            if res_trial < res or omega <= cfg.damping_floor:
                break
            omega *= 0.5
        w, res = trial, res_trial
        omega = min(1.0, 2.0 * omega)
    return (w, cfg.picard_max_iter, res) if res <= cfg.newton_tol else None


def step(cfg: ThetaConfig, problem: Problem, grid: TimeGrid, k: int, u_prev) -> StepResult:
    """Advance from u^{k-1} to u^k on slab k."""
    space = problem.space
    u_prev = np.asarray(u_prev, dtype=float)
    system = _StepSystem(cfg, problem, grid, k, u_prev)
    tau0 = admissible_tau0(problem.operator, problem.growth, space, cfg.theta)
    if not is_admissible(system.tau, tau0, problem.growth):
        if cfg.strict_admissibility:
            raise InadmissibleStep(k, system.tau, tau0)
        warnings.warn(str(InadmissibleStep(k, system.tau, tau0)), RuntimeWarning, stacklevel=2)

    out = _newton(system, u_prev.copy(), cfg, space.dual_norm)
    solver = "newton"
    if out is None and cfg.picard_fallback:
        log.info("slab %d: Newton stagnated, switching to Picard", k)
        out = _picard(system, u_prev.copy(), cfg, space.dual_norm)
        solver = "picard"
    if out is None:
        raise NonConvergence("Newton and Picard iterations exhausted", k)
    w, iterations, res = out

    theta = cfg.theta
    u_k = (w - (1.0 - theta) * u_prev) / theta
    zeta = system.surrogate(w)
    if problem.graph is None:
        xi = zeta
        clamp_distance = clamp_shift = 0.0
    else:
        s = space.iota @ w
        lo, hi = problem.graph.base_interval(s)
        m = system.m
        xi = np.clip(zeta, m * lo, m * hi)
        moved = np.flatnonzero(xi != zeta)
        clamp_shift = float(np.abs(xi - zeta).max()) if len(zeta) else 0.0
        clamp_distance = 0.0
        if m > 0:
            for i in moved:
                clamp_distance = max(clamp_distance,
                                     graph_distance(problem.graph, s[i], zeta[i] / m, 2.0 * system.eps))
    return StepResult(u_k, w, xi, zeta, iterations, float(res), clamp_distance, clamp_shift,
                      system.eps, solver)


def residual_certificate(cfg: ThetaConfig, problem: Problem, grid: TimeGrid, k: int,
                         u_prev, w, zeta) -> float:
    """Dual norm of the regularized step equation at stored (w, zeta)."""
    system = _StepSystem(cfg, problem, grid, k, np.asarray(u_prev, dtype=float))
    return problem.space.dual_norm(system.residual(np.asarray(w), np.asarray(zeta)))


def solve_trajectory(cfg: ThetaConfig, problem: Problem, grid: TimeGrid, u0) -> TrajectorySolution:
    if abs(grid.horizon - problem.T) > 1e-12 * problem.T:
        raise ValueError("grid horizon differs from the problem horizon")
    space = problem.space
    u0 = np.asarray(u0, dtype=float)
    space._check(u0)
    N = grid.count
    states = np.empty((N + 1, space.n))
    mids = np.empty((N, space.n))
    sels = np.empty((N, space.u_dim))
    surr = np.empty((N, space.u_dim))
    states[0] = u0
    steps = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for k in range(1, N + 1):
            try:
                res = step(cfg, problem, grid, k, states[k - 1])
            except NonConvergence:
                raise
            except ConvergenceError as exc:
                raise NonConvergence(str(exc), k) from exc
            log.debug("slab %d: %s, %d iterations, residual %.3g", k, res.solver, res.iterations,
                      res.residual_dual_norm)
            states[k], mids[k - 1] = res.u_k, res.w
            sels[k - 1], surr[k - 1] = res.xi_k, res.zeta_k
            steps.append({
                "iterations": res.iterations, "residual": res.residual_dual_norm,
                "clamp_distance": res.clamp_distance, "clamp_shift": res.clamp_shift,
                "epsilon": res.epsilon, "solver": res.solver,
            })
    if caught:
        warnings.warn(f"{len(caught)} slab(s) exceed the admissible step threshold "
                      f"({caught[0].message})", RuntimeWarning, stacklevel=2)
    return TrajectorySolution(grid, cfg.theta, states, mids, sels, surr, steps)
