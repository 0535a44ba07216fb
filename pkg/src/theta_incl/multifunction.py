"""Multivalued terms F(t, s) = m(t) * fill(fbar)(s) acting pointwise on U.

At a jump point s_j the graph of fbar is filled with the vertical interval
between its one-sided limits; elsewhere F is single valued.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .fem import Space
from .operators import ValidationReport
from .profiles import TimeProfile, make_profile
from .time_grid import TimeGrid


@dataclass(frozen=True)
class FilledGraph:
    """``branch`` evaluates fbar off the jumps; ``limits[j]`` = (fbar(s_j-), fbar(s_j+))."""

    name: str
    branch: Callable
    jumps: np.ndarray
    limits: np.ndarray
    modulation: TimeProfile

    def __post_init__(self):
        jumps = np.asarray(self.jumps, dtype=float)
        if np.any(np.diff(jumps) <= 0):
            raise ValueError("jump points must be strictly increasing")
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "limits", np.asarray(self.limits, dtype=float).reshape(len(jumps), 2))

    def base_interval(self, s) -> tuple[np.ndarray, np.ndarray]:
        """[lo, hi] of the filled fbar (no modulation)."""
        s = np.asarray(s, dtype=float)
        lo = np.asarray(self.branch(s), dtype=float).copy()
        hi = lo.copy()
        for sj, (left, right) in zip(self.jumps, self.limits):
            at = s == sj
            lo[at] = min(left, right)
            hi[at] = max(left, right)
        return lo, hi

    def min_gap(self) -> float:
        return float(np.diff(self.jumps).min()) if len(self.jumps) > 1 else np.inf


def interval_at(graph: FilledGraph, t: float, s) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = graph.base_interval(s)
    m = float(graph.modulation(t))
    return m * lo, m * hi


def slab_mean_modulation(graph: FilledGraph, grid: TimeGrid, k: int) -> float:
    return graph.modulation.mean(*grid.slab(k))


# -- registry ---------------------------------------------------------------

def heaviside(jumps=(0.0,), height: float = 1.0) -> tuple[Callable, np.ndarray]:
    """Staircase: height * #{j : s_j < s}."""
    jumps = np.asarray(jumps, dtype=float)
    branch = lambda s: height * np.searchsorted(jumps, s, side="left").astype(float)
    limits = [(height * j, height * (j + 1)) for j in range(len(jumps))]
    return branch, np.array(limits)


def sawtooth(jumps=(0.0, 1.0), amplitude: float = 1.0) -> tuple[Callable, np.ndarray]:
    """Teeth rising from 0 to ``amplitude`` between consecutive jumps, dropping at each jump.

    fbar = amplitude below the first jump and 0 above the last one, so every
    jump is a downward drop of size ``amplitude``.
    """
    jumps = np.asarray(jumps, dtype=float)

    def branch(s):
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(jumps, s, side="left")
        out = np.zeros_like(s)
        out[idx == 0] = amplitude
        inner = (idx > 0) & (idx < len(jumps))
        j = idx[inner]
        out[inner] = amplitude * (s[inner] - jumps[j - 1]) / (jumps[j] - jumps[j - 1])
        return out

    limits = [(amplitude, 0.0) for _ in jumps]
    return branch, np.array(limits)


def cubic_jump(jumps=(0.0,), coeff: float = 1.0, height: float = 1.0) -> tuple[Callable, np.ndarray]:
    """coeff * s|s| (derivative of a cubic potential) plus a staircase of unit jumps."""
    stair, stair_limits = heaviside(jumps, height)
    jumps = np.asarray(jumps, dtype=float)
    branch = lambda s: coeff * np.asarray(s) * np.abs(s) + stair(s)
    limits = stair_limits + (coeff * jumps * np.abs(jumps))[:, None]
    return branch, limits


BRANCHES = {"heaviside": heaviside, "sawtooth": sawtooth, "cubic_jump": cubic_jump}


def graph_from_config(cfg: dict) -> FilledGraph:
    """``{"branches": name, "jumps": [...], "modulation": name, ...branch params}``."""
    name = cfg["branches"]
    if name not in BRANCHES:
        raise ValueError(f"unknown branch profile {name!r}")
    extra = {k: cfg[k] for k in ("height", "amplitude", "coeff") if k in cfg}
    jumps = cfg.get("jumps", [0.0])
    branch, limits = BRANCHES[name](jumps, **extra)
    mod = cfg.get("modulation", "const")
    modulation = make_profile(mod) if isinstance(mod, str) else make_profile(mod["name"], **{
        k: v for k, v in mod.items() if k != "name"})
    lo, _ = modulation.bounds(1.0)
    if lo < 0:
        raise ValueError("time modulation must be nonnegative")
    return FilledGraph(name, branch, jumps, limits, modulation)


# -- regularized selection --------------------------------------------------

class RegularizedSelection:
    """Continuous surrogate of fbar: linear ramps across [s_j - eps, s_j + eps]."""

    def __init__(self, graph: FilledGraph, epsilon: float):
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        if 2.0 * epsilon >= graph.min_gap():
            raise ValueError(f"epsilon={epsilon} too large for jump spacing {graph.min_gap()}")
        self.graph, self.epsilon = graph, epsilon
        j = graph.jumps
        self._left = np.asarray(graph.branch(j - epsilon), dtype=float)
        self._right = np.asarray(graph.branch(j + epsilon), dtype=float)
        self._slope = (self._right - self._left) / (2.0 * epsilon)

    def _ramp(self, s):
        """Index of the ramp containing each s, or -1."""
        j = self.graph.jumps
        if not len(j):
            return np.full(np.shape(s), -1)
        idx = np.clip(np.searchsorted(j, s), 0, len(j) - 1)
        near = np.where(np.abs(s - j[idx]) <= self.epsilon, idx, -1)
        prev = np.clip(idx - 1, 0, len(j) - 1)
        return np.where((near < 0) & (np.abs(s - j[prev]) <= self.epsilon), prev, near)

    def value(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = np.asarray(self.graph.branch(s), dtype=float).copy()
        r = self._ramp(s)
        inside = r >= 0
        ri = r[inside]
        out[inside] = self._left[ri] + self._slope[ri] * (s[inside] - self.graph.jumps[ri] + self.epsilon)
        return out

    def slope(self, s) -> np.ndarray:
        """Generalized derivative: ramp slope inside, branch derivative outside."""
        s = np.asarray(s, dtype=float)
        h = min(1e-7, self.epsilon / 4.0)  # never reaches across a jump from outside a ramp
        r = self._ramp(s)
        out = (np.asarray(self.graph.branch(s + h)) - np.asarray(self.graph.branch(s - h))) / (2 * h)
        inside = r >= 0
        out[inside] = self._slope[r[inside]]
        return out


def regularize(graph: FilledGraph, epsilon: float) -> RegularizedSelection:
    return RegularizedSelection(graph, epsilon)


def graph_distance(graph: FilledGraph, s: float, y: float, window: float) -> float:
    """Smallest |s' - s| with y in the filled fbar(s'), searched within ``window``.

    Returns inf if no such s' exists inside the window.
    """
    lo, hi = graph.base_interval(np.array([s]))
    if lo[0] <= y <= hi[0]:
        return 0.0
    best = np.inf
    for sj, (left, right) in zip(graph.jumps, graph.limits):
        if abs(sj - s) <= window and min(left, right) <= y <= max(left, right):
            best = min(best, abs(sj - s))
    grid = np.linspace(s - window, s + window, 257)
    vals = np.asarray(graph.branch(grid), dtype=float) - y
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            best = min(best, abs(a - s))
        elif fa * fb < 0 and not np.any((graph.jumps > a) & (graph.jumps <= b)):
            root = brentq(lambda x: float(graph.branch(np.array([x]))[0]) - y, a, b)
            best = min(best, abs(root - s))
    return best


def slab_average_membership(graph: FilledGraph, grid: TimeGrid, k: int, u, xi,
                            tol: float = 1e-9) -> tuple[bool, float]:
    """Is xi in the slab-averaged interval at u (componentwise)?

    Returns ``(passed, worst signed distance)``; negative distances are
    interior points.
    """
    m = slab_mean_modulation(graph, grid, k)
    lo, hi = graph.base_interval(np.asarray(u, dtype=float))
    xi = np.asarray(xi, dtype=float)
    dist = np.maximum(m * lo - xi, xi - m * hi)
    worst = float(dist.max()) if dist.size else -np.inf
    return worst <= tol, worst


# -- growth conditions ------------------------------------------------------

@dataclass(frozen=True)
class GrowthParams:
    """Constants of the growth/coercivity conditions; ``case`` is "A" or "B"."""

    case: str
    c1: float = 0.0
    d1: float = 0.0
    c2: float = 0.0
    d2: float = 0.0
    lam: float = 0.0
    g: Callable = staticmethod(lambda t: 0.0)

    def __post_init__(self):
        if self.case not in ("A", "B"):
            raise ValueError(f"growth case must be 'A' or 'B', got {self.case!r}")
        if min(self.c1, self.d1, self.c2, self.d2) < 0:
            raise ValueError("growth constants must be nonnegative")

    def r(self, p: float) -> float:
        return max(1.0, p - 1.0)


def growth_from_config(cfg: dict) -> GrowthParams:
    params = dict(cfg.get("params", {}))
    g = params.pop("g", 0.0)
    return GrowthParams(cfg.get("case", "A"), g=lambda t, g=float(g): g, **params)


def lambda_margin(params: GrowthParams, alpha: float, space: Space) -> float:
    """alpha - lambda*||iota||^p; case B needs this strictly positive and lambda > 0."""
    return alpha - params.lam * space.embedding_norm() ** space.p


def _sample_states(graph: FilledGraph, dim: int, count: int, rng):
    out = [np.zeros(dim)]
    j = graph.jumps if len(graph.jumps) else np.zeros(1)
    span = max(1.0, float(np.abs(j).max()) * 2.0)
    for i in range(count - 1):
        kind = i % 4
        if kind == 0:
            u = rng.normal(size=dim) * 10.0 ** rng.uniform(-1, 1) * span
        elif kind == 1:
            u = rng.choice(j, size=dim)
        elif kind == 2:
            u = rng.choice(j, size=dim) + rng.choice([-1.0, 1.0], size=dim) * 1e-9
        else:
            u = np.full(dim, rng.choice(j)) + np.abs(rng.normal()) * 1e-3
        out.append(u)
    return out


def validate_growth(graph: FilledGraph, params: GrowthParams, space: Space, alpha: float, T: float,
                    sample_count: int = 200, seed: int = 0) -> ValidationReport:
    """Sample (t, u) and the extreme selections; report worst margins."""
    if params.case == "A" and space.embedding.mode == "boundary":
        raise ValueError("case A needs a continuous map H -> U; unavailable in boundary mode")
    rng = np.random.default_rng(seed)
    p = space.p
    w = space.u_weights
    growth, coerc = np.inf, np.inf
    for u in _sample_states(graph, space.u_dim, sample_count, rng):
        t = rng.uniform(0.0, T)
        lo, hi = interval_at(graph, t, u)
        extreme = np.maximum(np.abs(lo), np.abs(hi))
        xi_norm = float(np.sqrt(np.dot(w, extreme ** 2)))
        un = space.u_norm(u)
        # margins are relative to the bound, as for H(A)
        if params.case == "A":
            bound = params.c1 + params.d1 * un
        else:
            bound = params.c2 + params.d2 * un ** (p - 1.0)
            inf_pair = float(np.dot(w, np.minimum(lo * u, hi * u)))
            shift = params.lam * un ** p - params.g(t)
            coerc = min(coerc, (inf_pair + shift) / (1.0 + abs(shift)))
        growth = min(growth, (bound - xi_norm) / max(bound, 1e-300))
    margins = {"growth": growth}
    passed = growth >= -1e-9
    if params.case == "B":
        lm = lambda_margin(params, alpha, space)
        margins.update(coercivity=coerc, lambda_margin=lm)
        passed = passed and coerc >= -1e-9 and lm > 0 and params.lam > 0
    return ValidationReport(f"H(F) case {params.case}", passed, margins, sample_count)
