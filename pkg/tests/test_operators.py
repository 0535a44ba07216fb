import numpy as np
import pytest

from theta_incl.fem import SpatialMesh, interval_space
from theta_incl.operators import (HolderSpec, OperatorSpec, SourceSpec, apply, operator_from_config,
                                  slab_average_A, slab_average_f, slab_operator, validate_H_A,
                                  validate_holder)
from theta_incl.profiles import make_profile
from theta_incl.time_grid import TimeGrid, build_uniform


def spec(p=2.0, mu="const", alpha=None, beta=0.0, kappa=0.0, holder=None, **mu_params):
    cfg = {"p": p, "mu": {"name": mu, **mu_params}, "beta": beta, "kappa": kappa, "holder": holder}
    if alpha is not None:
        cfg["alpha"] = alpha
    return operator_from_config(cfg, 1.0)


def hat_space(p):
    return interval_space(SpatialMesh.uniform(1.0, 2), p)


def test_zero_state():
    sp = interval_space(SpatialMesh.uniform(1.0, 6), 2.0)
    assert np.array_equal(apply(spec(), sp, 0.3, np.zeros(sp.n)), np.zeros(sp.n))


def test_hat_stiffness_p2():
    assert apply(spec(), hat_space(2.0), 0.0, np.ones(1))[0] == pytest.approx(4.0, rel=1e-14)


def test_hat_p4():
    assert apply(spec(4.0), hat_space(4.0), 0.0, np.ones(1))[0] == pytest.approx(16.0, rel=1e-14)


def test_slab_average_constant_mu():
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 3.0)
    u = np.random.default_rng(0).normal(size=sp.n)
    s = spec(3.0)
    grid = build_uniform(1.0, 4)
    assert np.allclose(slab_average_A(s, sp, grid, 2, u), apply(s, sp, 0.37, u), rtol=1e-14)


@pytest.mark.parametrize("mu,params,eff", [("t", {}, 0.5), ("quadratic", {"c0": 0.0, "c2": 1.0}, 1.0 / 3.0)])
def test_slab_average_time_polynomials(mu, params, eff):
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 2.0)
    u = np.random.default_rng(1).normal(size=sp.n)
    grid = TimeGrid.from_points([0.0, 1.0])
    got = slab_average_A(spec(mu=mu, alpha=0.1, **params), sp, grid, 1, u)
    assert np.allclose(got, eff * (sp.stiffness @ u), rtol=1e-13, atol=1e-13)
    assert np.allclose(slab_operator(spec(mu=mu, alpha=0.1, **params), sp, grid, 1)(u), got, rtol=1e-13)


def test_slab_average_f():
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 2.0)
    g = lambda x: np.cos(x)
    grid = TimeGrid.from_points([0.0, 0.2, 0.7])
    assert np.allclose(slab_average_f(SourceSpec(lambda t, x: g(x)), sp, grid, 2), sp.load(g))
    assert np.allclose(slab_average_f(SourceSpec(lambda t, x: t * g(x)), sp, grid, 2),
                       0.45 * sp.load(g), rtol=1e-13)
    assert not slab_average_f(SourceSpec(lambda t, x: 0 * x), sp, grid, 1).any()


def test_validate_pure_plaplacian():
    sp = interval_space(SpatialMesh.uniform(1.0, 16), 3.0)
    rep = validate_H_A(spec(3.0), sp, 1.0, 50)
    assert rep.passed and rep.margins["coercivity"] >= -1e-12


def test_validate_overclaimed_alpha():
    sp = interval_space(SpatialMesh.uniform(1.0, 16), 2.0)
    rep = validate_H_A(spec(alpha=2.0), sp, 1.0, 50)
    assert not rep.passed and rep.verdict == "violated"


def test_validate_with_perturbation():
    sp = interval_space(SpatialMesh.uniform(1.0, 16), 2.0)
    assert validate_H_A(spec(kappa=0.5, beta=0.5), sp, 1.0, 50).passed


def test_holder_constant_mu():
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 2.0)
    rep = validate_holder(spec(holder={"C1": 0.0, "C2": 1e-9, "gamma": 1.0, "delta": 1.0}), sp, 1.0, 30)
    assert rep.passed and rep.margins["worst_ratio"] == 0.0


def test_holder_linear_mu():
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 2.0)
    h = {"C1": 0.0, "C2": 1.0, "gamma": 1.0, "delta": 1.0}
    assert validate_holder(spec(mu="t", alpha=0.1, holder=h), sp, 1.0, 30).passed
    h["gamma"] = 0.5
    assert validate_holder(spec(mu="t", alpha=0.1, holder=h), sp, 1.0, 30).passed


def test_holder_too_small_constant():
    sp = interval_space(SpatialMesh.uniform(1.0, 8), 2.0)
    h = {"C1": 0.0, "C2": 0.5, "gamma": 1.0, "delta": 1.0}
    assert not validate_holder(spec(mu="t", alpha=0.1, holder=h), sp, 1.0, 30).passed


def test_holder_delta_range():
    with pytest.raises(ValueError):
        spec(holder={"C1": 0.0, "C2": 1.0, "gamma": 1.0, "delta": 3.0})


def test_spec_validation():
    with pytest.raises(ValueError):
        OperatorSpec(2.0, 0.0, 0.0, make_profile("const"), 1.0, 1.0, lambda s: 1.0)


def test_profile_means():
    for name in ("t", "1+cos", "cos", "linear"):
        prof = make_profile(name)
        ts = np.linspace(0.2, 0.9, 200001)
        assert prof.mean(0.2, 0.9) == pytest.approx(np.trapezoid(prof(ts), ts) / 0.7, rel=1e-8)
