"""Variable time grids on [0, T] and their regularity constants."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

REL_TOL = 1e-12


@dataclass(frozen=True)
class TimeGrid:
    """Partition 0 = t^0 < t^1 < ... < t^N = T.

    ``points`` are running sums of ``taus`` with the last point pinned to
    ``horizon``; ``taus`` are kept as constructed so regularity constants
    are computed from the slab lengths themselves.
    """

    points: np.ndarray
    taus: np.ndarray
    horizon: float
    _list: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        taus = np.asarray(self.taus, dtype=float)
        if points.ndim != 1 or len(points) < 2:
            raise ValueError("a time grid needs at least one slab")
        if len(taus) != len(points) - 1:
            raise ValueError("taus must have one entry per slab")
        if points[0] != 0.0 or points[-1] != self.horizon:
            raise ValueError("grid must start at 0 and end at T")
        if np.any(np.diff(points) <= 0) or np.any(taus <= 0):
            raise ValueError("grid points must be strictly increasing")
        if abs(taus.sum() - self.horizon) > REL_TOL * self.horizon * max(1, len(taus)):
            raise ValueError("slab lengths do not sum to T")
        points.setflags(write=False)
        taus.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "_list", points.tolist())

    @property
    def count(self) -> int:
        return len(self.taus)

    @property
    def tau_max(self) -> float:
        return float(self.taus.max())

    @classmethod
    def from_taus(cls, taus, horizon: float | None = None) -> "TimeGrid":
        taus = np.asarray(taus, dtype=float)
        points = np.concatenate([[0.0], np.cumsum(taus)])
        if horizon is None:
            horizon = float(points[-1])
        points[-1] = horizon
        return cls(points, taus, float(horizon))

    @classmethod
    def from_points(cls, points) -> "TimeGrid":
        points = np.asarray(points, dtype=float)
        return cls(points, np.diff(points), float(points[-1]))

    def slab(self, k: int) -> tuple[float, float]:
        """Endpoints of slab k (1-based)."""
        if not 1 <= k <= self.count:
            raise IndexError(f"slab index {k} outside 1..{self.count}")
        return self._list[k - 1], self._list[k]


@dataclass(frozen=True)
class GridRegularity:
    tau_max: float
    tau_min: float
    K_observed: float
    r_ratios: np.ndarray
    r_max: float


def build_uniform(T: float, N: int) -> TimeGrid:
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if int(N) != N or N < 1:
        raise ValueError(f"slab count must be a positive integer, got {N}")
    return TimeGrid.from_taus(np.full(int(N), T / N), T)


def build_random_regular(T: float, N: int, K_target: float, seed: int) -> TimeGrid:
    """Random grid with tau_max/tau_min <= K_target.

    Raw slab weights are drawn uniformly from [1, K_target] and rescaled to
    sum to T, so the regularity bound holds by construction.
    """
    if not T > 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if int(N) != N or N < 1:
        raise ValueError(f"slab count must be a positive integer, got {N}")
    if not K_target >= 1:
        raise ValueError(f"K_target must be >= 1, got {K_target}")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(1.0, K_target, int(N))
    taus = raw / raw.sum() * T
    # rescaling can push the ratio a few ulps over the target
    while taus.max() / taus.min() > K_target:
        raw = 1.0 + (raw - 1.0) * (1.0 - 1e-12)
        taus = raw / raw.sum() * T
    return TimeGrid.from_taus(taus, T)


def build_grid(spec: dict, T: float) -> TimeGrid:
    """Grid from a config mapping ``{"kind", "N", "K_target", "seed"}``."""
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        return build_uniform(T, spec["N"])
    if kind == "random_regular":
        return build_random_regular(T, spec["N"], spec.get("K_target", 2.0), spec.get("seed", 0))
    raise ValueError(f"unknown grid kind {kind!r}")


def refinement_family(T: float, Ns, kind: str = "uniform", K_target: float = 2.0,
                      seed: int = 0) -> list[TimeGrid]:
    """One grid per entry of ``Ns``; random members get seeds seed, seed+1, ..."""
    return [build_grid({"kind": kind, "N": N, "K_target": K_target, "seed": seed + i}, T)
            for i, N in enumerate(Ns)]


def regularity(grid: TimeGrid) -> GridRegularity:
    taus = grid.taus
    ratios = taus[1:] / taus[:-1]
    r_max = float(ratios.max()) if len(ratios) else 1.0
    return GridRegularity(
        tau_max=float(taus.max()),
        tau_min=float(taus.min()),
        K_observed=float(taus.max() / taus.min()),
        r_ratios=ratios,
        r_max=r_max,
    )


def validate_ratio_condition(grid: TimeGrid, theta: float, p: float) -> tuple[bool, float]:
    """Check r_max < (theta/(1-theta))**p.

    Returns ``(passed, margin)`` with margin = bound - r_max (inf for theta = 1,
    where any ratio bound is admissible).
    """
    if not 0.5 <= theta <= 1.0:
        raise ValueError(f"ratio condition needs theta in [1/2, 1], got {theta}")
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if theta == 1.0:
        return True, float("inf")
    bound = (theta / (1.0 - theta)) ** p
    r_max = regularity(grid).r_max
    return r_max < bound, bound - r_max


def slab_of(grid: TimeGrid, t: float) -> int:
    """Index k with t in (t^{k-1}, t^k]; t = 0 belongs to slab 1."""
    if not 0.0 <= t <= grid.horizon:
        raise ValueError(f"time {t} outside [0, {grid.horizon}]")
    return max(1, bisect.bisect_left(grid._list, t))
