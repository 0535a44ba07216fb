"""Variable-step theta-scheme solver for quasilinear parabolic differential inclusions."""

from .fem import EmbeddingSpec, SpatialMesh, interval_space, scalar_space
from .stepper import (InadmissibleStep, NonConvergence, Problem, ThetaConfig, TrajectorySolution,
                      solve_trajectory, step)
from .time_grid import TimeGrid, build_random_regular, build_uniform

__version__ = "0.1.0"

__all__ = [
    "EmbeddingSpec", "InadmissibleStep", "NonConvergence", "Problem", "SpatialMesh", "ThetaConfig",
    "TimeGrid", "TrajectorySolution", "build_random_regular", "build_uniform", "interval_space",
    "scalar_space", "solve_trajectory", "step",
]
