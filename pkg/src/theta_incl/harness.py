"""Single runs, refinement studies and their CSV/JSON artifacts."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .diagnostics import (ConvergenceReport, TrajectoryReference, apriori, trajectory_errors,
                          uniformity_ratios)
from .interpolants import bar_track, bbb_identity, hat_track
from .multifunction import slab_average_membership
from .scenarios import Scenario, build_scenario, validate_scenario
from .stepper import ThetaConfig, TrajectorySolution, admissible_tau0, residual_certificate, \
    solve_trajectory
from .time_grid import (TimeGrid, build_grid, build_uniform, regularity,
                        validate_ratio_condition)

log = logging.getLogger(__name__)

REFINE = 16
_SOLVER_KEYS = {f.name for f in fields(ThetaConfig)} - {"theta"}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class ValidationFailure(RuntimeError):
    def __init__(self, reports: dict):
        failed = [k for k, r in reports.items() if not r.passed]
        super().__init__(f"hypothesis validation failed: {', '.join(failed)}")
        self.reports = reports


def load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def theta_config(theta, solver: dict | None = None) -> ThetaConfig:
    solver = dict(solver or {})
    unknown = set(solver) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver key(s): {', '.join(sorted(unknown))}")
    try:
        return ThetaConfig(theta=float(theta), **solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver settings: {exc}") from exc


def load_scenario(cfg: dict, validate: bool = True, sample_count: int = 20) -> Scenario:
    if "scenario" not in cfg:
        raise ConfigError("missing key 'scenario'")
    try:
        sc = build_scenario(cfg["scenario"], cfg.get("overrides"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if validate:
        reports = validate_scenario(sc, sample_count)
        if not all(r.passed for r in reports.values()):
            raise ValidationFailure(reports)
    return sc


# ---------------------------------------------------------------- references

def fine_reference(sc: Scenario, N: int, solver: dict | None = None, theta: float = 0.5):
    """Uniform grid with REFINE*N slabs (theta = 1/2 unless overridden); returns (reference, lineage)."""
    grid = build_uniform(sc.problem.T, REFINE * N)
    cfg = theta_config(theta, solver)
    traj = solve_trajectory(cfg, sc.problem, grid, sc.u0)
    lineage = {"kind": "fine-grid", "N": grid.count, "theta": theta,
               "max_residual": max(s["residual"] for s in traj.steps)}
    return TrajectoryReference(hat_track(traj), "fine-grid"), lineage


def reference_for(sc: Scenario, N: int, solver: dict | None = None, data=None, theta: float = 0.5):
    if sc.reference is not None:
        return sc.reference, {"kind": "exact"}
    if data is not None:
        points, states, lineage = data
        traj = TrajectorySolution(TimeGrid.from_points(points), 0.5, np.asarray(states),
                                  np.empty((0, 0)), np.empty((0, 0)), np.empty((0, 0)))
        return TrajectoryReference(hat_track(traj), "fine-grid"), lineage
    return fine_reference(sc, N, solver, theta)


# ------------------------------------------------------------------- reports

def step_checks(traj: TrajectorySolution, sc: Scenario, cfg: ThetaConfig) -> dict:
    space, grid, theta = sc.problem.space, traj.grid, traj.theta
    bbb = bbb_identity(hat_track(traj), bar_track(traj), theta, space.h_inner)
    alg = 0.0
    for a, b in zip(traj.states[1:], traj.states[:-1]):
        d = a - b
        lhs = space.h_inner(d, theta * a + (1.0 - theta) * b)
        rhs = 0.5 * (space.h_norm(a) ** 2 - space.h_norm(b) ** 2 + (2 * theta - 1) * space.h_norm(d) ** 2)
        alg = max(alg, abs(lhs - rhs))
    ok, margin = validate_ratio_condition(grid, theta, space.p)
    tau0 = admissible_tau0(sc.problem.operator, sc.problem.growth, space, theta)
    certs = [residual_certificate(cfg, sc.problem, grid, k, traj.states[k - 1], traj.mids[k - 1],
                                  traj.surrogates[k - 1]) for k in range(1, grid.count + 1)]
    clamp = max((s["clamp_distance"] - s["epsilon"] for s in traj.steps), default=0.0)
    member = -math.inf
    if sc.problem.graph is not None:
        for k in range(1, grid.count + 1):
            _, worst = slab_average_membership(sc.problem.graph, grid, k, space.iota @ traj.mids[k - 1],
                                               traj.selections[k - 1])
            member = max(member, worst)
    return {
        "bbb_residual": bbb[2],
        "bbb_lhs": bbb[0],
        "bbb_rhs": bbb[1],
        "algebraic_residual": alg,
        "ratio_condition": {"passed": bool(ok), "margin": _num(margin)},
        "admissibility": {"tau0": _num(tau0), "tau_max": grid.tau_max,
                          "margin": _num(tau0 - grid.tau_max),
                          "passed": bool(grid.tau_max < tau0 if sc.problem.growth is not None
                                         and sc.problem.growth.case == "A" else grid.tau_max <= tau0)},
        "max_certificate": max(certs, default=0.0),
        "clamp_excess": clamp,
        "membership_worst": _num(member),
    }


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def run_report(sc: Scenario, traj: TrajectorySolution, cfg: ThetaConfig, reference=None,
               lineage=None, eps_offset: float = 0.0, with_bvq: bool = True) -> dict:
    reg = regularity(traj.grid)
    ap = apriori(traj, sc.problem, with_bvq).as_dict()
    lemma43 = ap.pop("sums_lemma43")
    ap["hat_bar_gap"] = {"value": ap["hat_bar_gap"][0], "bound": ap["hat_bar_gap"][1]}
    errors = {}
    if reference is not None:
        e = trajectory_errors(traj, reference, sc.problem.space, eps_offset)
        errors = {"pointwise_H": e.pointwise_H, "L2_H": e.L2_H, "Lp_V_bar": e.Lp_V_bar,
                  "eps_offset": eps_offset, "reference": lineage}
    return {
        "scenario": sc.name,
        "theta": traj.theta,
        "grid": {"N": traj.grid.count, "K": reg.K_observed, "r_max": reg.r_max,
                 "tau_max": reg.tau_max},
        "apriori": {k: _num(v) if isinstance(v, float) else v for k, v in ap.items()},
        "lemma43": lemma43,
        "errors": errors,
        "orders": {},
        "checks": step_checks(traj, sc, cfg),
    }


# ---------------------------------------------------------------- artifacts

def _fmt(x) -> str:
    return "%.17g" % x


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def write_trajectory(out: Path, sc: Scenario, traj: TrajectorySolution, config: dict, report: dict):
    out.mkdir(parents=True, exist_ok=True)
    space = sc.problem.space
    n, m = space.n, space.u_dim
    pts = traj.grid.points
    write_text(out / "states.csv", _csv_text(
        ["t"] + [f"u{i}" for i in range(n)],
        ([pts[k]] + list(traj.states[k]) for k in range(traj.grid.count + 1))))
    write_text(out / "selections.csv", _csv_text(
        ["slab", "t_start", "t_end"] + [f"xi{i}" for i in range(m)] + [f"zeta{i}" for i in range(m)],
        ([k, pts[k - 1], pts[k]] + list(traj.selections[k - 1]) + list(traj.surrogates[k - 1])
         for k in range(1, traj.grid.count + 1))))
    rows = []
    for k in range(traj.grid.count + 1):
        if k == 0:
            rows.append([pts[0], space.h_norm(traj.states[0]), 0, "", "", "", "", "", ""])
            continue
        s, w = traj.steps[k - 1], traj.mids[k - 1]
        rows.append([pts[k], space.h_norm(traj.states[k]), k, space.v_norm(w), space.h_norm(w),
                     s["iterations"], s["residual"], s["clamp_distance"], s["epsilon"]])
    write_text(out / "diagnostics.csv", _csv_text(
        ["t", "hat_H_norm", "slab", "w_V_norm", "w_H_norm", "iterations", "residual",
         "clamp_distance", "epsilon"], rows))
    meta = {"config": config, "scenario_config": sc.config, "theta": traj.theta,
            "grid_points": [float(t) for t in pts], "solvers": [s["solver"] for s in traj.steps]}
    write_text(out / "trajectory.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    write_text(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")


def read_trajectory(path) -> tuple[dict, TrajectorySolution, Scenario, ThetaConfig]:
    path = Path(path)
    meta = load_json(path / "trajectory.json")
    config = meta["config"]
    sc = load_scenario(config, validate=False)
    cfg = theta_config(meta["theta"], config.get("solver"))
    grid = TimeGrid.from_points(meta["grid_points"])
    states = np.loadtxt(path / "states.csv", delimiter=",", skiprows=1, ndmin=2)[:, 1:]
    sel = np.loadtxt(path / "selections.csv", delimiter=",", skiprows=1, ndmin=2)[:, 3:]
    m = sc.problem.space.u_dim
    theta = cfg.theta
    mids = theta * states[1:] + (1.0 - theta) * states[:-1]
    diag = np.genfromtxt(path / "diagnostics.csv", delimiter=",", names=True)
    steps = [{"iterations": int(r["iterations"]), "residual": float(r["residual"]),
              "clamp_distance": float(r["clamp_distance"]), "epsilon": float(r["epsilon"]),
              "clamp_shift": float("nan"), "solver": s}
             for r, s in zip(np.atleast_1d(diag)[1:], meta["solvers"])]
    traj = TrajectorySolution(grid, theta, states, mids, sel[:, :m], sel[:, m:], steps)
    return meta, traj, sc, cfg


# -------------------------------------------------------------------- solve

def run_solve(config: dict, out) -> dict:
    """Solve one configured run and persist it; returns the report."""
    sc = load_scenario(config)
    cfg = theta_config(config.get("theta", 1.0), config.get("solver"))
    try:
        grid = build_grid(config.get("grid", {"kind": "uniform", "N": 32}), sc.problem.T)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc
    log.info("solving %s: theta=%g, %d slabs", sc.name, cfg.theta, grid.count)
    traj = solve_trajectory(cfg, sc.problem, grid, sc.u0)
    reference = lineage = None
    if sc.reference is not None or config.get("fine_reference", False):
        reference, lineage = reference_for(sc, grid.count, config.get("solver"),
                                           theta=float(config.get("reference_theta", 0.5)))
    report = run_report(sc, traj, cfg, reference, lineage, float(config.get("eps_offset", 0.0)),
                        config.get("with_bvq", True))
    log.info("writing %s", out)
    write_trajectory(Path(out), sc, traj, config, report)
    return report


def diagnose(path) -> dict:
    """Recompute the report from a persisted trajectory and compare error rows."""
    meta, traj, sc, cfg = read_trajectory(path)
    config = meta["config"]
    reference = lineage = None
    if sc.reference is not None or config.get("fine_reference", False):
        reference, lineage = reference_for(sc, traj.grid.count, config.get("solver"),
                                           theta=float(config.get("reference_theta", 0.5)))
    report = run_report(sc, traj, cfg, reference, lineage, float(config.get("eps_offset", 0.0)),
                        config.get("with_bvq", True))
    stored_path = Path(path) / "report.json"
    if stored_path.exists():
        stored = load_json(stored_path)
        diffs = {}
        for key in ("pointwise_H", "L2_H", "Lp_V_bar"):
            val, old = report["errors"].get(key), stored["errors"].get(key)
            if val is not None and old is not None:
                diffs[key] = abs(val - old) / max(abs(old), 1e-300)
        report["round_trip"] = diffs
    return report


# -------------------------------------------------------------------- study

@dataclass
class StudyPlan:
    scenario: str
    thetas: list
    kind: str = "uniform"
    Ns: list = field(default_factory=lambda: [8, 16, 32, 64])
    K_target: float = 2.0
    seed: int = 0
    eps_offset: float = 0.0
    overrides: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    mesh_control: bool = False
    with_bvq: bool = True
    uniform_ratio: float = 1.25
    reference_theta: float = 0.5

    @classmethod
    def from_dict(cls, d: dict) -> "StudyPlan":
        try:
            grids = d.get("grids", {})
            plan = cls(
                scenario=d["scenario"],
                thetas=[float(t) for t in d.get("thetas", [1.0])],
                kind=grids.get("kind", "uniform"),
                Ns=[int(n) for n in grids.get("N", [8, 16, 32, 64])],
                K_target=float(grids.get("K_target", 2.0)),
                seed=int(grids.get("seed", 0)),
                eps_offset=float(d.get("eps_offset", 0.0)),
                overrides=d.get("overrides", {}) or {},
                solver=d.get("solver", {}) or {},
                mesh_control=bool(d.get("mesh_control", False)),
                with_bvq=bool(d.get("with_bvq", True)),
                uniform_ratio=float(d.get("uniform_ratio", 1.25)),
                reference_theta=float(d.get("reference_theta", 0.5)),
            )
        except KeyError as exc:
            raise ConfigError(f"study plan: missing key {exc}") from exc
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"study plan: {exc}") from exc
        if not plan.Ns or any(b <= a for a, b in zip(plan.Ns, plan.Ns[1:])):
            raise ConfigError("study plan: N sequence must be strictly increasing")
        for th in plan.thetas + [plan.reference_theta]:
            theta_config(th, plan.solver)
        return plan

    def config(self, theta, grid_spec, overrides=None) -> dict:
        return {"scenario": self.scenario, "overrides": overrides or self.overrides,
                "theta": theta, "grid": grid_spec, "solver": self.solver,
                "eps_offset": self.eps_offset, "with_bvq": self.with_bvq,
                "reference_theta": self.reference_theta}


def _study_job(args):
    """Worker: rebuild the scenario by name, solve one (theta, grid), return the report."""
    config, ref_data = args
    sc = load_scenario(config, validate=False)
    cfg = theta_config(config["theta"], config.get("solver"))
    grid = build_grid(config["grid"], sc.problem.T)
    log.info("study run %s: theta=%g, %d slabs", sc.name, cfg.theta, grid.count)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = solve_trajectory(cfg, sc.problem, grid, sc.u0)
    reference, lineage = reference_for(sc, grid.count, config.get("solver"), ref_data)
    report = run_report(sc, traj, cfg, reference, lineage, config.get("eps_offset", 0.0),
                        config.get("with_bvq", True))
    report["warnings"] = [str(w.message) for w in caught]
    return report


def _reference_job(args):
    config, N = args
    sc = load_scenario(config, validate=False)
    log.info("fine reference for %s: %d slabs", sc.name, REFINE * N)
    ref, lineage = fine_reference(sc, N, config.get("solver"), config.get("reference_theta", 0.5))
    return ref.hat.grid.points, ref.hat.states, lineage


def _map(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_study(plan: StudyPlan, out=None, jobs: int = 1) -> dict:
    """Solve every (theta, grid) of the plan; results merged in (theta, N) order."""
    load_scenario(plan.config(1.0, {}))
    specs = [{"kind": plan.kind, "N": N, "K_target": plan.K_target, "seed": plan.seed + i}
             for i, N in enumerate(plan.Ns)]
    base = plan.config(1.0, specs[-1])
    sc = load_scenario(base, validate=False)
    ref_data = None
    if sc.reference is None:
        ref_data = _reference_job((base, plan.Ns[-1]))
    jobs_list = [(plan.config(th, spec), ref_data) for th in sorted(plan.thetas) for spec in specs]
    reports = _map(_study_job, jobs_list, jobs)

    families = {}
    for th in sorted(plan.thetas):
        rows = [r for r in reports if r["theta"] == th]
        rows.sort(key=lambda r: r["grid"]["N"])
        conv = ConvergenceReport()
        for r in rows:
            conv.add(r)
        if rows[0]["errors"]:
            conv.finalize()
        else:
            conv.warnings.append("no reference: errors skipped")
        for w in conv.warnings:
            log.warning("theta=%g: %s", th, w)

        class _A:  # adapter for uniformity_ratios
            def __init__(self, r):
                self.lhs_lemma42 = r["apriori"]["lhs_lemma42"]
                self.sums_lemma43 = r["lemma43"]
        ratios = uniformity_ratios([_A(r) for r in rows])
        errs = [r["errors"].get("pointwise_H") for r in rows]
        fam = {
            "theta": th,
            "N": [r["grid"]["N"] for r in rows],
            "orders": conv.orders,
            "warnings": conv.warnings + sorted({w for r in rows for w in r.get("warnings", [])}),
            "uniformity": ratios,
            "uniform_pass": all(v < plan.uniform_ratio for v in ratios.values()),
            "strictly_decreasing": bool(rows[0]["errors"]) and all(b < a for a, b in zip(errs, errs[1:])),
            "max_certificate": max(r["checks"]["max_certificate"] for r in rows),
            "max_clamp_excess": max(r["checks"]["clamp_excess"] for r in rows),
            "membership_passed": all(r["checks"]["membership_worst"] == "-inf"
                                     or r["checks"]["membership_worst"] <= 1e-9 for r in rows),
            "max_bbb_residual": max(r["checks"]["bbb_residual"] for r in rows),
            "increment_sums": [r["apriori"]["increment_sum"] for r in rows],
        }
        for r in rows:
            r["orders"] = conv.orders
        if plan.mesh_control and sc.problem.space.n > 1:
            fam["mesh_control"] = _mesh_control(plan, th, specs[-1], rows[-1], ref_data)
        families[_theta_key(th)] = fam

    result = {"scenario": plan.scenario, "kind": plan.kind, "families": families, "runs": reports}
    if out is not None:
        write_study(Path(out), result)
    return result


def _theta_key(th) -> str:
    return "theta=%g" % th


def _mesh_control(plan: StudyPlan, theta, spec, finest: dict, ref_data) -> dict:
    """Rerun the finest grid with the spatial mesh halved."""
    sc = load_scenario(plan.config(theta, spec), validate=False)
    mesh = sc.config["mesh"]
    over = json.loads(json.dumps(plan.overrides))
    over.setdefault("mesh", {})["M_elements"] = 2 * int(mesh["M_elements"])
    rep = _study_job((plan.config(theta, spec, over), None if sc.reference is not None else ref_data))
    a, b = finest["errors"]["pointwise_H"], rep["errors"]["pointwise_H"]
    return {"M_elements": [int(mesh["M_elements"]), 2 * int(mesh["M_elements"])],
            "pointwise_H": [a, b], "relative_change": abs(a - b) / a}


SUMMARY_COLUMNS = ["theta", "N", "K", "tau_max", "r_max", "pointwise_H", "L2_H", "Lp_V_bar",
                   "order_pointwise_H", "order_L2_H", "order_Lp_V_bar", "lhs_lemma42", "sum_A",
                   "sum_xi", "sum_derivative", "increment_sum", "bbb_residual", "max_certificate",
                   "tau0_margin"]


def summary_rows(result: dict):
    for r in result["runs"]:
        e, o = r["errors"], r["orders"]
        adm = r["checks"]["admissibility"]["margin"]
        yield [r["theta"], r["grid"]["N"], r["grid"]["K"], r["grid"]["tau_max"], r["grid"]["r_max"],
               e.get("pointwise_H", ""), e.get("L2_H", ""), e.get("Lp_V_bar", ""),
               o.get("pointwise_H", {}).get("order", ""), o.get("L2_H", {}).get("order", ""),
               o.get("Lp_V_bar", {}).get("order", ""), r["apriori"]["lhs_lemma42"],
               r["lemma43"]["A"], r["lemma43"]["xi"], r["lemma43"]["derivative"],
               r["apriori"]["increment_sum"], r["checks"]["bbb_residual"],
               r["checks"]["max_certificate"], adm]


def write_study(out: Path, result: dict):
    out.mkdir(parents=True, exist_ok=True)
    for r in result["runs"]:
        name = "report_theta%g_N%05d.json" % (r["theta"], r["grid"]["N"])
        write_text(out / name, json.dumps(r, indent=2, sort_keys=True) + "\n")
    write_text(out / "summary.csv", _csv_text(SUMMARY_COLUMNS, summary_rows(result)))
    study = {k: v for k, v in result.items() if k != "runs"}
    write_text(out / "study.json", json.dumps(study, indent=2, sort_keys=True) + "\n")
