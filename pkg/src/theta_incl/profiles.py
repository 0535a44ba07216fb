"""Named scalar time profiles with exact slab means."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TimeProfile:
    """c0 + c1*t + c2*t**2 + c3*cos(omega*t)."""

    name: str
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    omega: float = 2.0 * math.pi

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.c0 + self.c1 * t + self.c2 * t * t + self.c3 * np.cos(self.omega * t)

    def _antiderivative(self, t: float) -> float:
        out = self.c0 * t + self.c1 * t * t / 2.0 + self.c2 * t ** 3 / 3.0
        if self.c3:
            out += self.c3 * math.sin(self.omega * t) / self.omega
        return out

    def mean(self, a: float, b: float) -> float:
        """Exact mean over (a, b)."""
        return (self._antiderivative(b) - self._antiderivative(a)) / (b - a)

    def bounds(self, T: float, samples: int = 2001) -> tuple[float, float]:
        """Min and max over [0, T] (dense sampling plus the polynomial vertex)."""
        ts = np.linspace(0.0, T, samples)
        if self.c2 and 0.0 < -self.c1 / (2 * self.c2) < T:
            ts = np.append(ts, -self.c1 / (2 * self.c2))
        vals = self(ts)
        return float(vals.min()), float(vals.max())


def make_profile(name: str, **params) -> TimeProfile:
    """Registry lookup.

    ``const`` (value), ``linear`` / ``t`` (c0 + c1 t), ``quadratic`` (c0 + c2 t^2),
    ``cos`` (c0 + c1 cos(omega t)), ``1+cos`` (1 + cos(omega t)).
    """
    if name == "const":
        return TimeProfile(name, c0=params.get("value", 1.0))
    if name == "linear":
        return TimeProfile(name, c0=params.get("c0", 1.0), c1=params.get("c1", 0.5))
    if name == "t":
        return TimeProfile(name, c1=1.0)
    if name == "quadratic":
        return TimeProfile(name, c0=params.get("c0", 0.0), c2=params.get("c2", 1.0))
    if name == "cos":
        return TimeProfile(name, c0=params.get("c0", 1.0), c3=params.get("c1", 0.5),
                           omega=params.get("omega", 2.0 * math.pi))
    if name == "1+cos":
        return TimeProfile(name, c0=1.0, c3=1.0, omega=params.get("omega", 2.0 * math.pi))
    raise ValueError(f"unknown time profile {name!r}")
