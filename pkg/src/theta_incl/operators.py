"""Quasilinear operators A(t, u) = -(mu(t)|u'|^{p-2}u')' + b(u) and their slab averages.

The perturbation b(s) = -kappa*s/(1+s^2) is bounded and continuous, so the
full operator is only pseudomonotone; ``<b(v), v> >= -kappa ||v||_H^2`` gives
beta = kappa for the coercivity constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .fem import Space, gauss_rule
from .profiles import TimeProfile, make_profile
from .time_grid import TimeGrid

GAUSS3 = gauss_rule(3)


@dataclass(frozen=True)
class HolderSpec:
    C1: float
    C2: float
    gamma: float
    delta: float


@dataclass(frozen=True)
class OperatorSpec:
    p: float
    alpha: float
    beta: float
    mu: Callable
    mu_lo: float
    mu_hi: float
    growth_a: Callable[[float], float]
    kappa: float = 0.0
    holder: HolderSpec | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        # mu_lo = 0 is allowed for averaging studies; coercivity is left to validate_H_A
        if self.mu_lo < 0 or self.mu_hi < self.mu_lo:
            raise ValueError("need 0 <= mu_lo <= mu_hi")
        if self.holder is not None:
            h = self.holder
            if not 0 < h.gamma <= 1:
                raise ValueError("Holder exponent gamma must lie in (0, 1]")
            if not 0 < h.delta < self.p * (h.gamma + 1) - 1:
                raise ValueError("Holder delta must lie in (0, p(gamma+1)-1)")

    def b(self, s):
        return -self.kappa * s / (1.0 + s * s)

    def db(self, s):
        s2 = s * s
        return -self.kappa * (1.0 - s2) / (1.0 + s2) ** 2


@dataclass(frozen=True)
class SourceSpec:
    """f(t, x); paired with test functions by spatial quadrature."""

    f: Callable


def principal(space: Space, u, mu: float) -> np.ndarray:
    a = space.D @ u
    return mu * (space.D.T @ (space.hD * np.abs(a) ** (space.p - 2.0) * a)) if space.p != 2.0 \
        else mu * (space.stiffness @ u)


def apply(spec: OperatorSpec, space: Space, t: float, u) -> np.ndarray:
    """Dual vector <A(t, u), phi_i>."""
    u = np.asarray(u, dtype=float)
    space._check(u)
    out = principal(space, u, float(spec.mu(t)))
    if spec.kappa:
        out = out + space.Q2.T @ (space.w2 * spec.b(space.Q2 @ u))
    return out


def _slab_nodes(grid: TimeGrid, k: int):
    a, b = grid.slab(k)
    xr, wr = GAUSS3
    return a + (b - a) * xr, wr


def slab_mu(spec: OperatorSpec, grid: TimeGrid, k: int) -> float:
    ts, ws = _slab_nodes(grid, k)
    return float(np.dot(ws, spec.mu(ts)))


def slab_average_A(spec: OperatorSpec, space: Space, grid: TimeGrid, k: int, u) -> np.ndarray:
    """3-point Gauss-Legendre mean of t -> A(t, u) over slab k."""
    ts, ws = _slab_nodes(grid, k)
    return sum(w * apply(spec, space, t, u) for t, w in zip(ts, ws))


def slab_average_f(source: SourceSpec, space: Space, grid: TimeGrid, k: int) -> np.ndarray:
    ts, ws = _slab_nodes(grid, k)
    return sum(w * space.load(lambda x, t=t: source.f(t, x)) for t, w in zip(ts, ws))


class SlabOperator:
    """A_n^k with the time average folded into the coefficient mu."""

    def __init__(self, spec: OperatorSpec, space: Space, mu_bar: float):
        self.spec, self.space, self.mu_bar = spec, space, mu_bar

    def __call__(self, u) -> np.ndarray:
        space, spec = self.space, self.spec
        out = principal(space, u, self.mu_bar)
        if spec.kappa:
            out = out + space.Q2.T @ (space.w2 * spec.b(space.Q2 @ u))
        return out

    def jacobian(self, u):
        space, spec, p = self.space, self.spec, self.space.p
        if p == 2.0:
            J = self.mu_bar * space.stiffness
        else:
            a = space.D @ u
            floor = 1e-12 * max(np.abs(a).max(), 1e-300)
            curv = (p - 1.0) * space.hD * (a * a + floor * floor) ** ((p - 2.0) / 2.0)
            J = self.mu_bar * (space.D.T @ sp.diags(curv) @ space.D)
        if spec.kappa:
            J = J + space.Q2.T @ sp.diags(space.w2 * spec.db(space.Q2 @ u)) @ space.Q2
        return J


def slab_operator(spec: OperatorSpec, space: Space, grid: TimeGrid, k: int) -> SlabOperator:
    return SlabOperator(spec, space, slab_mu(spec, grid, k))


# -- hypothesis validators --------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    """Sampling outcome; a pass means no violation was found, not a proof."""

    name: str
    passed: bool
    margins: dict
    samples: int

    @property
    def verdict(self) -> str:
        return "no violation found" if self.passed else "violated"


def sample_functions(space: Space, count: int, rng: np.random.Generator, scale=(-1.0, 1.0)):
    """Random coefficient vectors: rough, smooth (few sine modes), and zero."""
    out = [np.zeros(space.n)]
    xs = np.linspace(0.0, 1.0, space.n + 2)[1:-1]
    for i in range(count - 1):
        amp = 10.0 ** rng.uniform(*scale)
        if i % 2 == 0:
            v = rng.normal(size=space.n)
        else:
            modes = rng.normal(size=4)
            v = sum(c * np.sin((j + 1) * np.pi * xs) for j, c in enumerate(modes)) + rng.normal() * 0.3
        out.append(amp * v / max(np.abs(v).max(), 1e-300))
    return out


def validate_H_A(spec: OperatorSpec, space: Space, T: float, sample_count: int = 100,
                 seed: int = 0) -> ValidationReport:
    rng = np.random.default_rng(seed)
    coerc, growth = np.inf, np.inf
    p = space.p
    for v in sample_functions(space, sample_count, rng):
        t = rng.uniform(0.0, T)
        Av = apply(spec, space, t, v)
        vn = space.v_norm(v)
        hn = space.h_norm(v)
        # margins relative to the size of the terms, so roundoff does not read as a violation
        lower = spec.alpha * vn ** p - spec.beta * hn ** 2
        coerc = min(coerc, (float(np.dot(Av, v)) - lower) / (1.0 + abs(lower)))
        bound = spec.growth_a(hn) * (1.0 + vn ** (p - 1.0))
        growth = min(growth, (bound - space.dual_norm(Av)) / bound)
    return ValidationReport("H(A)", coerc >= -1e-9 and growth >= -1e-9,
                            {"coercivity": coerc, "growth": growth}, sample_count)


def validate_holder(spec: OperatorSpec, space: Space, T: float, sample_count: int = 100,
                    seed: int = 0) -> ValidationReport:
    if spec.holder is None:
        raise ValueError("operator carries no Holder metadata")
    h = spec.holder
    rng = np.random.default_rng(seed)
    worst = 0.0
    for v in sample_functions(space, sample_count, rng):
        s, t = rng.uniform(0.0, T, 2)
        if s == t:
            continue
        diff = space.dual_norm(apply(spec, space, t, v) - apply(spec, space, s, v))
        bound = (h.C1 + h.C2 * space.v_norm(v) ** h.delta) * abs(t - s) ** h.gamma
        if bound > 0:
            worst = max(worst, diff / bound)
        elif diff > 0:
            worst = np.inf
    return ValidationReport("Holder", worst <= 1.0 + 1e-9, {"worst_ratio": worst}, sample_count)


def operator_from_config(cfg: dict, T: float) -> OperatorSpec:
    """Build from ``{"p", "mu", "kappa", "alpha", "beta", "a", "holder"}``."""
    mu_cfg = cfg.get("mu", "const")
    if isinstance(mu_cfg, str):
        mu = make_profile(mu_cfg)
    else:
        mu = make_profile(mu_cfg["name"], **{k: v for k, v in mu_cfg.items() if k != "name"})
    lo, hi = mu.bounds(T)
    a_const = float(cfg.get("a", hi + cfg.get("kappa", 0.0)))
    holder = cfg.get("holder")
    return OperatorSpec(
        p=float(cfg.get("p", 2.0)),
        alpha=float(cfg.get("alpha", lo)),
        beta=float(cfg.get("beta", cfg.get("kappa", 0.0))),
        mu=mu, mu_lo=lo, mu_hi=hi,
        growth_a=lambda s, a=a_const: a,
        kappa=float(cfg.get("kappa", 0.0)),
        holder=HolderSpec(**holder) if holder else None,
    )


__all__ = [
    "HolderSpec", "OperatorSpec", "SourceSpec", "SlabOperator", "TimeProfile", "ValidationReport",
    "apply", "slab_average_A", "slab_average_f", "slab_mu", "slab_operator",
    "validate_H_A", "validate_holder", "operator_from_config", "sample_functions",
]
