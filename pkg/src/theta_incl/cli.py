"""Command-line entry point: solve, study, validate, diagnose."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

from .fem import ConvergenceError
from .harness import (ConfigError, StudyPlan, ValidationFailure, diagnose, load_json, load_scenario,
                      run_solve, run_study, theta_config)
from .scenarios import REGISTRY, validate_scenario
from .stepper import InadmissibleStep

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("theta_incl")


def _setup_logging():
    level = os.environ.get("THETA_INCL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)


def _dump(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_solve(args) -> int:
    report = run_solve(load_json(args.config), args.out)
    g, c = report["grid"], report["checks"]
    print(f"solved {report['scenario']}: theta={report['theta']:g} N={g['N']} "
          f"tau_max={g['tau_max']:.6g} max certificate={c['max_certificate']:.3g}")
    for key in ("pointwise_H", "L2_H", "Lp_V_bar"):
        if key in report["errors"]:
            print(f"  {key} error {report['errors'][key]:.6e}")
    return EXIT_OK


def cmd_study(args) -> int:
    plan = StudyPlan.from_dict(load_json(args.plan))
    result = run_study(plan, args.out, args.jobs)
    for key, fam in result["families"].items():
        orders = ", ".join(f"{k} {v['order']:.3f}" for k, v in fam["orders"].items()) or "omitted"
        print(f"{plan.scenario} {key}: orders {orders}; uniform bounds "
              f"{'ok' if fam['uniform_pass'] else 'exceeded'}")
        for w in fam["warnings"]:
            print(f"  warning: {w}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_json(args.config) if args.config else {}
    if args.scenario:
        config["scenario"] = args.scenario
    if "theta" in config:
        theta_config(config["theta"], config.get("solver"))
    sc = load_scenario(config, validate=False)
    reports = validate_scenario(sc, args.samples)
    ok = True
    for name, rep in reports.items():
        ok = ok and rep.passed
        margins = ", ".join(f"{k}={float(v):.4g}" for k, v in rep.margins.items())
        print(f"{name}: {rep.verdict} ({margins})")
    print("all checks passed" if ok else "validation FAILED")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_diagnose(args) -> int:
    _dump(diagnose(args.trajectory))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="theta-incl", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="solve one configured run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("study", help="refinement study over a grid family")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_study)
    p = sub.add_parser("validate", help="check a scenario's hypotheses")
    p.add_argument("--scenario", choices=sorted(REGISTRY))
    p.add_argument("--config", help="JSON with overrides (and optionally theta)")
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("diagnose", help="recompute diagnostics of a persisted trajectory")
    p.add_argument("--trajectory", required=True)
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except InadmissibleStep as exc:
        print(f"error: InadmissibleStep: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ConvergenceError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
