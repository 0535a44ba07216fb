import numpy as np
import pytest

from theta_incl.fem import EmbeddingSpec, SpatialMesh, interval_space, scalar_space
from theta_incl.multifunction import (GrowthParams, graph_distance, graph_from_config, interval_at,
                                      lambda_margin, regularize, slab_average_membership,
                                      validate_growth)
from theta_incl.time_grid import TimeGrid


def hv(modulation="const", **extra):
    return graph_from_config({"branches": "heaviside", "jumps": [0.0], "modulation": modulation, **extra})


def test_filled_jump():
    lo, hi = interval_at(hv(), 0.3, np.array([0.0, 2.0, -1.0]))
    assert list(lo) == [0.0, 1.0, 0.0] and list(hi) == [1.0, 1.0, 0.0]


def test_modulation_scaling():
    g = hv({"name": "const", "value": 2.0})
    lo, hi = interval_at(g, 0.5, np.array([0.0]))
    assert (lo[0], hi[0]) == (0.0, 2.0)


def test_negative_modulation_rejected():
    with pytest.raises(ValueError):
        hv({"name": "const", "value": -1.0})


def test_ramp_values():
    sel = regularize(hv(), 0.1)
    assert sel.value(np.array([0.0]))[0] == pytest.approx(0.5)
    assert sel.value(np.array([0.2]))[0] == 1.0
    assert sel.value(np.array([-0.05]))[0] == pytest.approx(0.25)
    assert sel.slope(np.array([0.0, 0.5]))[0] == pytest.approx(5.0)
    assert sel.slope(np.array([0.5]))[0] == 0.0


def test_ramp_width_vs_gap():
    g = graph_from_config({"branches": "sawtooth", "jumps": [0.2, 0.6], "amplitude": 0.5})
    regularize(g, 0.1)
    with pytest.raises(ValueError):
        regularize(g, 0.2)


def test_sawtooth_continuity_between_jumps():
    g = graph_from_config({"branches": "sawtooth", "jumps": [0.2, 0.6], "amplitude": 0.5})
    s = np.array([0.0, 0.2, 0.4, 0.6, 1.0])
    lo, hi = g.base_interval(s)
    assert np.allclose(lo, [0.5, 0.0, 0.25, 0.0, 0.0]) and np.allclose(hi, [0.5, 0.5, 0.25, 0.5, 0.0])
    sel = regularize(g, 0.05)
    ss = np.linspace(-0.5, 1.5, 4001)
    assert np.abs(np.diff(sel.value(ss))).max() < 0.02


def test_cubic_jump_limits():
    g = graph_from_config({"branches": "cubic_jump", "jumps": [1.0], "coeff": 2.0})
    lo, hi = g.base_interval(np.array([1.0, -1.0]))
    assert (lo[0], hi[0]) == (2.0, 3.0)
    assert lo[1] == hi[1] == -2.0


def test_membership_interior_and_exterior():
    g = hv()
    grid = TimeGrid.from_points([0.0, 1.0])
    ok, d = slab_average_membership(g, grid, 1, np.array([0.0]), np.array([0.5]))
    assert ok and d < 0
    ok, d = slab_average_membership(g, grid, 1, np.array([0.0]), np.array([1.0 + 0.1 * 2.0]))
    assert not ok and d > 0


def test_membership_time_modulation():
    g = hv("t")
    ok, _ = slab_average_membership(g, TimeGrid.from_points([0.0, 1.0]), 1, np.array([0.0]), np.array([0.4]))
    assert ok
    ok, _ = slab_average_membership(g, TimeGrid.from_points([0.0, 1.0]), 1, np.array([0.0]), np.array([0.6]))
    assert not ok


def test_graph_distance():
    g = hv()
    assert graph_distance(g, 0.0, 0.3, 0.5) == 0.0
    assert graph_distance(g, 0.05, 0.7, 0.5) == pytest.approx(0.05)
    assert graph_distance(g, -0.2, 0.0, 0.5) == 0.0


def test_growth_case_A():
    sp = scalar_space()
    g = hv()
    assert validate_growth(g, GrowthParams("A", c1=1.0), sp, 1.0, 1.0, 100).passed
    rep = validate_growth(g, GrowthParams("A", c1=0.5), sp, 1.0, 1.0, 100)
    assert not rep.passed


def test_case_A_boundary_mode_rejected():
    sp = interval_space(SpatialMesh.uniform(1.0, 4, "natural"), 2.0, EmbeddingSpec("boundary"))
    with pytest.raises(ValueError):
        validate_growth(hv(), GrowthParams("A", c1=1.0), sp, 1.0, 1.0, 10)


def test_lambda_margin_half():
    sp = interval_space(SpatialMesh.uniform(1.0, 32, "natural"), 2.0, EmbeddingSpec("boundary"))
    alpha = 1.0
    lam = alpha / (2.0 * sp.embedding_norm() ** 2)
    assert lambda_margin(GrowthParams("B", c2=3.0, lam=lam), alpha, sp) == pytest.approx(alpha / 2)


def test_lambda_margin_boundary_fails():
    sp = interval_space(SpatialMesh.uniform(1.0, 32, "natural"), 2.0, EmbeddingSpec("boundary"))
    lam = 1.0 / sp.embedding_norm() ** 2
    g = hv("1+cos")
    assert validate_growth(g, GrowthParams("B", c2=3.0, lam=lam), sp, 1.0, 1.0, 50).passed is False
    assert validate_growth(g, GrowthParams("B", c2=3.0, lam=0.5 * lam), sp, 1.0, 1.0, 50).passed


def test_unknown_branch():
    with pytest.raises(ValueError):
        graph_from_config({"branches": "nope"})
