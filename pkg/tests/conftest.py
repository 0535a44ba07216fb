import numpy as np
import pytest

from theta_incl.fem import scalar_space
from theta_incl.multifunction import GrowthParams, graph_from_config
from theta_incl.operators import SourceSpec, operator_from_config
from theta_incl.stepper import Problem


def scalar_problem(f=0.0, beta=0.0, graph=None, growth=None, T=1.0, p_map=None):
    """V = H = U = R, A(u) = u."""
    op = operator_from_config({"p": 2.0, "mu": "const", "alpha": 1.0, "beta": beta}, T)
    space = scalar_space(2.0, p_map_norm_bound=p_map)
    return Problem(space, op, SourceSpec(lambda t, x: f + 0.0 * np.asarray(x)), T, graph, growth)


def heaviside_problem(f=0.5, T=1.0):
    g = graph_from_config({"branches": "heaviside", "jumps": [0.0]})
    return scalar_problem(f, graph=g, growth=GrowthParams("A", c1=1.0), T=T)


@pytest.fixture
def desk():
    return heaviside_problem()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
