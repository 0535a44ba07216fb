"""Registered model problems and their construction from JSON-style configs."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from .diagnostics import ExactReference
from .fem import EmbeddingSpec, SpatialMesh, interval_space, scalar_space
from .multifunction import (GrowthParams, graph_from_config, growth_from_config, lambda_margin,
                            validate_growth)
from .operators import SourceSpec, operator_from_config, validate_H_A, validate_holder
from .stepper import Problem

PI = math.pi


class ScenarioError(ValueError):
    """Unknown scenario or invalid override."""


def _heat_exact(t, x):
    return np.exp(-t) * np.sin(PI * x)


def _mu_tdep(t):
    return 1.0 + 0.5 * t


SOURCES = {
    "heat": lambda t, x: (PI ** 2 - 1.0) * np.exp(-t) * np.sin(PI * x),
    "heat_tdep": lambda t, x: (_mu_tdep(t) * PI ** 2 - 1.0) * np.exp(-t) * np.sin(PI * x),
    "five_sine": lambda t, x: 5.0 * np.sin(PI * x),
    "robin_load": lambda t, x: 2.0 * np.cos(PI * x) + 1.0,
    "half": lambda t, x: 0.5 + 0.0 * np.asarray(x),
    "zero": lambda t, x: 0.0 * np.asarray(x),
}

INITIAL = {
    "sine": lambda x: np.sin(PI * x),
    "sine_0.8": lambda x: 0.8 * np.sin(PI * x),
    "cosine": lambda x: np.cos(PI * x),
    "step": lambda x: ((np.asarray(x) > 0.25) & (np.asarray(x) < 0.75)).astype(float),
    "zero": lambda x: 0.0 * np.asarray(x),
    "one": lambda x: 1.0 + 0.0 * np.asarray(x),
}

EXACT = {"heat": _heat_exact, "heat_tdep": _heat_exact}

REGISTRY = {
    "heat": {
        "T": 1.0,
        "mesh": {"L": 1.0, "M_elements": 1000, "bc": "dirichlet"},
        "embedding": {"mode": "source"},
        "operator": {"p": 2.0, "mu": "const", "kappa": 0.0, "alpha": 1.0, "beta": 0.0, "a": 1.0,
                     "holder": None},
        "multifunction": None,
        "source": "heat", "initial": "sine", "reference": "exact",
    },
    "heat_tdep": {
        "T": 1.0,
        "mesh": {"L": 1.0, "M_elements": 1000, "bc": "dirichlet"},
        "embedding": {"mode": "source"},
        "operator": {"p": 2.0, "mu": {"name": "linear", "c0": 1.0, "c1": 0.5}, "kappa": 0.0,
                     "alpha": 1.0, "beta": 0.0, "a": 1.5,
                     "holder": {"C1": 1e-3, "C2": 0.5, "gamma": 1.0, "delta": 1.0}},
        "multifunction": None,
        "source": "heat_tdep", "initial": "sine", "reference": "exact",
    },
    "jump_source": {
        "T": 1.0,
        "mesh": {"L": 1.0, "M_elements": 64, "bc": "dirichlet"},
        "embedding": {"mode": "source"},
        "operator": {"p": 2.0, "mu": {"name": "const", "value": 0.1}, "kappa": 0.5, "alpha": 0.1,
                     "beta": 0.5, "a": 0.6,
                     "holder": None},
        "multifunction": {"branches": "heaviside", "jumps": [0.5], "modulation": "const",
                          "case": "A", "params": {"c1": 1.0, "d1": 0.0}},
        "source": "five_sine", "initial": "sine", "reference": "fine-grid",
    },
    "plap_jump": {
        "T": 1.0,
        "mesh": {"L": 1.0, "M_elements": 64, "bc": "dirichlet"},
        "embedding": {"mode": "source", "iota_norm_bound": 0.5},
        "operator": {"p": 3.0, "mu": "const", "kappa": 0.2, "alpha": 1.0, "beta": 0.2, "a": 1.2,
                     "holder": None},
        "multifunction": {"branches": "sawtooth", "jumps": [0.2, 0.6], "amplitude": 0.5,
                          "modulation": "const", "case": "B",
                          "params": {"c2": 0.5, "d2": 0.0, "lam": 1.0, "g": -0.14}},
        "source": "five_sine", "initial": "sine_0.8", "reference": "fine-grid",
    },
    "robin_mv": {
        "T": 1.0,
        "mesh": {"L": 1.0, "M_elements": 64, "bc": "natural"},
        "embedding": {"mode": "boundary"},
        "operator": {"p": 2.0, "mu": "const", "kappa": 0.1, "alpha": 1.0, "beta": 1.1, "a": 1.1,
                     "holder": None},
        "multifunction": {"branches": "heaviside", "jumps": [0.0], "modulation": "1+cos",
                          "case": "B", "params": {"c2": 2.83, "d2": 0.0, "lam_fraction": 0.5, "g": 0.0}},
        "source": "robin_load", "initial": "cosine", "reference": "fine-grid",
    },
    "ode_desk": {
        "T": 1.0,
        "mesh": None,
        "embedding": {"mode": "source"},
        "operator": {"p": 2.0, "mu": "const", "kappa": 0.0, "alpha": 1.0, "beta": 0.0, "a": 1.0,
                     "holder": None},
        "multifunction": {"branches": "heaviside", "jumps": [0.0], "modulation": "const",
                          "case": "A", "params": {"c1": 1.0, "d1": 0.0}},
        "source": "half", "initial": "zero", "reference": "fine-grid",
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class Scenario:
    name: str
    config: dict
    problem: Problem
    u0: np.ndarray
    reference: object | None

    @property
    def reference_kind(self) -> str:
        return self.config["reference"]


def scenario_config(name: str, overrides: dict | None = None) -> dict:
    if name not in REGISTRY:
        raise ScenarioError(f"unknown scenario {name!r}; known: {', '.join(sorted(REGISTRY))}")
    cfg = _merge(REGISTRY[name], overrides or {})
    cfg["name"] = name
    return cfg


def build_scenario(name: str, overrides: dict | None = None) -> Scenario:
    cfg = scenario_config(name, overrides)
    T = float(cfg["T"])
    try:
        op = operator_from_config(cfg["operator"], T)
        emb = EmbeddingSpec(**cfg.get("embedding", {}))
        if cfg["mesh"] is None:
            space = scalar_space(op.p, emb.iota_norm_bound, emb.p_map_norm_bound)
        else:
            m = cfg["mesh"]
            mesh = SpatialMesh.uniform(float(m["L"]), int(m["M_elements"]), m.get("bc", "dirichlet"))
            space = interval_space(mesh, op.p, emb)
        graph = growth = None
        mf = cfg.get("multifunction")
        if mf:
            graph = graph_from_config(mf)
            params = dict(mf.get("params", {}))
            if "lam_fraction" in params:
                frac = params.pop("lam_fraction")
                params["lam"] = frac * op.alpha / space.embedding_norm() ** space.p
            growth = growth_from_config({"case": mf.get("case", "A"), "params": params})
        source = SourceSpec(SOURCES[cfg["source"]])
        u0 = space.l2_project(INITIAL[cfg["initial"]])
    except KeyError as exc:
        raise ScenarioError(f"scenario {name!r}: missing or unknown key {exc}") from exc
    except TypeError as exc:
        raise ScenarioError(f"scenario {name!r}: {exc}") from exc
    problem = Problem(space, op, source, T, graph, growth)
    if cfg["reference"] == "exact":
        if name not in EXACT:
            raise ScenarioError(f"scenario {name!r} has no closed-form solution")
        if cfg["initial"] != REGISTRY[name]["initial"] or cfg["source"] != REGISTRY[name]["source"]:
            # the closed form only solves the registered data
            cfg["reference"] = "fine-grid"
    reference = ExactReference(EXACT[name]) if cfg["reference"] == "exact" else None
    return Scenario(name, cfg, problem, u0, reference)


def validate_scenario(sc: Scenario, sample_count: int = 60, seed: int = 0) -> dict:
    """Run the hypothesis validators; returns {check name: ValidationReport}."""
    prob = sc.problem
    out = {"H(A)": validate_H_A(prob.operator, prob.space, prob.T, sample_count, seed)}
    if prob.operator.holder is not None:
        out["Holder"] = validate_holder(prob.operator, prob.space, prob.T, sample_count, seed)
    if prob.graph is not None:
        out["H(F)"] = validate_growth(prob.graph, prob.growth, prob.space, prob.operator.alpha,
                                      prob.T, 2 * sample_count, seed)
    return out


__all__ = ["REGISTRY", "Scenario", "ScenarioError", "build_scenario", "scenario_config",
           "validate_scenario", "lambda_margin", "GrowthParams"]
