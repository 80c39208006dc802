"""Batch front end: scenario JSON in, curve/report/mesh files and a summary out.

Exit codes: 0 success, 2 scenario error, 3 solver failure, 4 failed
certification (artifacts are still written).
"""

from __future__ import annotations

import argparse
import contextlib
import copy
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import curves, periods
from .cone import ConeVariety
from .domain import PlanarDomain, annulus
from .errors import NullforgeError
from .generators import GENERATORS, generate
from .holo import LaurentMap
from .jsonio import decode, decode_scalar

log = logging.getLogger("nullforge")

EXIT_OK, EXIT_SCHEMA, EXIT_SOLVER, EXIT_CERT = 0, 2, 3, 4
COMMANDS = ("build", "certify", "mesh", "sl2", "growth")

_complex = {"oneOf": [{"type": "number"},
                      {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_circle = {"type": "object", "required": ["c", "r"],
           "properties": {"c": _complex, "r": {"type": "number", "exclusiveMinimum": 0}}}

SCHEMA = {
    "type": "object",
    "required": ["domain", "seed"],
    "properties": {
        "variety": {"oneOf": [{"const": "null3"},
                              {"type": "object", "required": ["Q"]}]},
        "domain": {"type": "object", "required": ["outer"],
                   "properties": {"outer": _circle, "holes": {"type": "array", "items": _circle}}},
        "seed": {"oneOf": [
            {"type": "object", "required": ["generator"],
             "properties": {"generator": {"enum": sorted(GENERATORS)}}},
            {"type": "object", "required": ["map"], "properties": {"map": {"type": "object"}}},
        ]},
        "base": {"type": "object", "properties": {"p": _complex, "value": {"type": "array"}}},
        "solver": {"type": "object", "properties": {
            "slots": {"type": ["integer", "null"], "minimum": 1},
            "seed": {"type": "integer", "minimum": 0},
            "tol": {"type": "number", "exclusiveMinimum": 0},
            "max_iter": {"type": "integer", "minimum": 1},
            "fixed_component": {"type": ["integer", "null"], "minimum": 1},
            "degree": {"type": "integer", "minimum": 1},
        }, "additionalProperties": False},
        "certify": {"type": "object", "properties": {
            "directedness": {"type": "boolean"},
            "embedding": {"type": "object", "properties": {
                "grid": {"type": "integer", "minimum": 2},
                "delta": {"type": ["number", "null"]},
                "min_gap": {"type": "number"},
                "perturb": {"type": "boolean"},
                "attempts": {"type": "integer", "minimum": 0},
                "bound": {"type": "number", "exclusiveMinimum": 0},
            }},
            "sl2": {"type": "object", "properties": {"grid": {"type": "integer", "minimum": 2}}},
            "mesh": {"type": "object", "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "rings": {"type": "integer", "minimum": 3},
                "spokes": {"type": "integer", "minimum": 3},
                "radii": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "tol": {"type": ["number", "null"]},
            }},
            "growth": {"type": "object", "properties": {
                "shells": {"type": "array", "items": {"type": "number"}}}},
        }},
        "output": {"type": "object", "properties": {
            "dir": {"type": "string"}, "curve": {"type": "string"}, "report": {"type": "string"},
            "mesh": {"type": "string"}, "summary": {"type": "string"}}},
    },
}

SOLVER_DEFAULTS = {"slots": None, "seed": 0, "tol": 1e-10, "max_iter": 50,
                   "fixed_component": None, "degree": 64}
OUTPUT_DEFAULTS = {"dir": "out", "curve": "curve.json", "report": "report.csv",
                   "mesh": "mesh.obj", "summary": "summary.json"}


class ScenarioError(ValueError):
    pass


def _hash(scenario):
    blob = json.dumps(scenario, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _raw_hash(scenario):
    """Hash of whatever could be read, for summaries of rejected scenarios."""
    if isinstance(scenario, dict):
        try:
            return _hash(scenario)
        except (TypeError, ValueError):
            return None
    try:
        return hashlib.sha256(Path(scenario).read_bytes()).hexdigest()
    except OSError:
        return None


def load_scenario(path):
    try:
        with open(path) as fh:
            scenario = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    validate(scenario)
    return scenario


def validate(scenario):
    try:
        jsonschema.validate(scenario, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"schema error at {where}: {exc.message}") from exc


def _setup(scenario):
    try:
        variety = ConeVariety.from_spec(scenario.get("variety", "null3"))
        domain = PlanarDomain.from_json(scenario["domain"])
        seed = scenario["seed"]
        f = generate(seed["generator"], domain) if "generator" in seed else \
            LaurentMap.from_json(seed["map"], domain)
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc
    if f.n != variety.n:
        raise ScenarioError(f"seed map has {f.n} components, variety needs {variety.n}")
    return variety, domain, f


def _f(x):
    """Floats for the summary; non-finite values become strings."""
    x = float(x)
    return x if np.isfinite(x) else repr(x)


class Run:
    """State of one pipeline run; collects residuals, checks and artifacts."""

    def __init__(self, scenario, out_dir):
        self.scenario = scenario
        self.out = Path(out_dir)
        self.residuals = {}
        self.checks = {}
        self.artifacts = []

    def check(self, name, value, threshold, passed, **extra):
        self.checks[name] = {"value": _f(value), "threshold": _f(threshold), "passed": bool(passed)}
        self.checks[name].update(extra)

    def write(self, key, writer):
        name = {**OUTPUT_DEFAULTS, **self.scenario.get("output", {})}[key]
        path = self.out / name
        writer(path)
        self.artifacts.append(name)

    def build(self):
        variety, domain, f = _setup(self.scenario)
        solver = {**SOLVER_DEFAULTS, **self.scenario.get("solver", {})}
        corrected = f
        if domain.l:
            fam = periods.build_family(f, variety, slots=solver["slots"], seed=solver["seed"],
                                       fixed_component=solver["fixed_component"])
            res = periods.correct_periods(fam, tol=solver["tol"], max_iter=solver["max_iter"],
                                          D=solver["degree"])
            corrected = res.corrected
            self.residuals.update(iterations=res.iterations, zeta_norm=_f(np.linalg.norm(res.zeta)),
                                  quadrature_period_residual=_f(res.period_residual),
                                  fit_residual=_f(res.fit_residual))
        per = corrected.periods()
        self.residuals["period_residual"] = _f(np.max(np.abs(per))) if per.size else 0.0
        base = self.scenario.get("base", {})
        p = base.get("p")
        value = base.get("value")
        curve = curves.integrate_curve(
            corrected, variety,
            base=(None if p is None else decode_scalar(p), None if value is None else decode(value)))
        self.residuals["membership_residual"] = _f(curve.membership_residual)
        self.residuals["immersion_margin"] = _f(curve.immersion_margin)
        self.curve = curve
        rep = curves.directedness_report(curve)
        self.check("directedness", rep.max_residual, 1e-9 * rep.scale, rep.passed,
                   min_norm=_f(rep.min_norm))
        self.write("curve", lambda path: path.write_text(json.dumps(curve.to_json(), sort_keys=True)))
        return curve

    def certify_embedding(self, grid=None):
        cfg = self.scenario.get("certify", {}).get("embedding", {})
        G = grid or cfg.get("grid", 64)
        min_gap = cfg.get("min_gap", 1e-6)
        gap = curves.embedding_gap(self.curve, G, cfg.get("delta"))
        self.residuals["embedding_gap_initial"] = _f(gap.gap)
        if gap.gap <= min_gap and cfg.get("perturb", False):
            solver = {**SOLVER_DEFAULTS, **self.scenario.get("solver", {})}
            res = curves.perturb_to_embedding(self.curve, seed=solver["seed"],
                                              attempts=cfg.get("attempts", 8),
                                              bound=cfg.get("bound", 1e-2), G=G,
                                              delta=cfg.get("delta"))
            self.residuals["perturbation_gaps"] = [_f(g) for g in res.gaps]
            self.residuals["perturbation_distances"] = [_f(d) for d in res.distances]
            self.residuals["perturbation_attempt"] = res.attempt
            self.curve, gap = res.curve, res.gap
            self.write("curve", lambda path: path.write_text(
                json.dumps(self.curve.to_json(), sort_keys=True)))
        self.residuals["embedding_gap"] = _f(gap.gap)
        self.check("embedding", gap.gap, min_gap, gap.gap > min_gap, grid=G,
                   witness=[[w.real, w.imag] for w in gap.witness])

    def certify_sl2(self, grid=None):
        cfg = self.scenario.get("certify", {}).get("sl2", {})
        s = curves.to_sl2(self.curve, G=grid or cfg.get("grid", 32))
        self.check("sl2_det", s.det_error, 1e-10, s.det_error < 1e-10)
        self.check("sl2_null", s.null_error, 1e-6, s.null_error < 1e-6)

        def dump(path):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["re_z", "im_z"] + [f"{p}{ij}" for ij in ("11", "12", "21", "22")
                                               for p in ("re", "im")])
                for z, M in zip(s.points, s.Z):
                    w.writerow([repr(z.real), repr(z.imag)]
                               + [repr(float(x)) for m in M.ravel() for x in (m.real, m.imag)])
        self.write_named("sl2.csv", dump)

    def certify_mesh(self):
        cfg = self.scenario.get("certify", {}).get("mesh", {})
        m = curves.minimal_surface_mesh(self.curve, h=cfg.get("h", 1e-2), rings=cfg.get("rings", 24),
                                        spokes=cfg.get("spokes", 64), radii=cfg.get("radii"))
        tol = cfg.get("tol")
        self.residuals["mesh_conformality"] = _f(m.max_conformality)
        self.residuals["mesh_harmonicity"] = _f(m.max_harmonicity)
        worst = max(m.max_conformality, m.max_harmonicity)
        self.check("mesh", worst, tol if tol is not None else float("inf"),
                   tol is None or worst < tol)
        self.write("mesh", m.to_obj)

    def certify_growth(self):
        cfg = self.scenario.get("certify", {}).get("growth", {})
        dom = self.curve.domain
        inner = max([abs(c - dom.outer_center) + r for c, r in dom.holes], default=0.0)
        shells = cfg.get("shells") or list(np.linspace(inner + 0.25 * (dom.outer_radius - inner),
                                                       dom.outer_radius, 4))
        rows = curves.growth_profile(self.curve, shells)
        self.residuals["growth"] = [[_f(r), _f(v)] for r, v in rows]

        def dump(path):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["radius", "min_max_F1_F2"])
                w.writerows([[repr(r), repr(v)] for r, v in rows])
        self.write_named("growth.csv", dump)

    def write_named(self, name, writer):
        writer(self.out / name)
        self.artifacts.append(name)

    def report(self):
        def dump(path):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["check", "value", "threshold", "passed"])
                for name in sorted(self.checks):
                    c = self.checks[name]
                    w.writerow([name, c["value"], c["threshold"], c["passed"]])
        self.write("report", dump)


def run_scenario(scenario, command="certify", out_dir=None, seed=None, grid=None):
    """Run one subcommand on a scenario (dict or path). Returns (exit code, summary)."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    try:
        scenario = load_scenario(scenario) if not isinstance(scenario, dict) else scenario
        validate(scenario)
    except ScenarioError as exc:
        out = Path(out_dir or OUTPUT_DEFAULTS["dir"])
        out.mkdir(parents=True, exist_ok=True)
        summary = {"tool": "nullforge", "version": __version__, "command": command,
                   "scenario_sha256": _raw_hash(scenario), "status": "schema-error",
                   "exit_code": EXIT_SCHEMA, "error": str(exc)}
        (out / OUTPUT_DEFAULTS["summary"]).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
        return EXIT_SCHEMA, summary
    scenario = copy.deepcopy(scenario)
    if seed is not None:
        scenario.setdefault("solver", {})["seed"] = int(seed)
    out = Path(out_dir or scenario.get("output", {}).get("dir", OUTPUT_DEFAULTS["dir"]))
    out.mkdir(parents=True, exist_ok=True)
    run = Run(scenario, out)
    summary = {"tool": "nullforge", "version": __version__, "command": command,
               "scenario_sha256": _hash(scenario)}
    code, error = EXIT_OK, None
    try:
        run.build()
        if command == "certify":
            run.certify_embedding(grid)
        elif command == "mesh":
            run.certify_mesh()
        elif command == "sl2":
            run.certify_sl2(grid)
        elif command == "growth":
            run.certify_growth()
    except ScenarioError as exc:
        code, error = EXIT_SCHEMA, str(exc)
    except (NullforgeError, np.linalg.LinAlgError) as exc:
        if getattr(run, "curve", None) is None:
            code, error = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
        else:
            code, error = EXIT_CERT, f"{type(exc).__name__}: {exc}"
    if code == EXIT_OK and not all(c["passed"] for c in run.checks.values()):
        code = EXIT_CERT
    if code != EXIT_SCHEMA:
        run.report()
    summary.update(status={0: "ok", 2: "schema-error", 3: "solver-error", 4: "certification-failed"}[code],
                   exit_code=code, residuals=run.residuals, checks=run.checks,
                   artifacts=sorted(set(run.artifacts)))
    if error:
        summary["error"] = error
    name = {**OUTPUT_DEFAULTS, **scenario.get("output", {})}["summary"]
    (out / name).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return code, summary


def demo_scenarios():
    """One scenario per named generator."""
    ring = annulus(0.5, 2.0).to_json()
    disc = PlanarDomain(0.0, 1.0).to_json()
    return {
        "catenoid": {"domain": ring, "seed": {"generator": "catenoid"},
                     "base": {"p": [1.0, 0.0], "value": [[0, 0], [0, 0], [10, 0]]},
                     "certify": {"mesh": {"radii": [0.6, 1.9]}}},
        "enneper": {"domain": ring, "seed": {"generator": "enneper"}},
        "line": {"domain": disc, "seed": {"generator": "line"}},
        "even-selfcross": {"domain": ring, "seed": {"generator": "even-selfcross"},
                           "certify": {"embedding": {"perturb": True, "min_gap": 1e-3}}},
    }


def run_demo(out_dir="out", seed=None, grid=None):
    worst, results = EXIT_OK, {}
    for name, scenario in demo_scenarios().items():
        code, summary = run_scenario(scenario, "certify", Path(out_dir) / name, seed, grid)
        results[name] = summary
        worst = max(worst, code)
        log.info("%-15s exit %d  period %s  gap %s", name, code,
                 summary["residuals"].get("period_residual"),
                 summary["residuals"].get("embedding_gap"))
    return worst, results


def _limit_threads():
    n = os.environ.get("NULLFORGE_THREADS")
    if not n:
        return contextlib.nullcontext()
    return threadpool_limits(limits=int(n))


def build_parser():
    p = argparse.ArgumentParser(prog="nullforge", description="Directed curves from period-corrected seeds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS + ("demo",):
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "demo", help="scenario JSON file")
        s.add_argument("--out-dir", help="output directory (overrides the scenario)")
        s.add_argument("--seed", type=int, help="solver seed (overrides the scenario)")
        s.add_argument("--grid", type=int, help="certification grid size")
        s.add_argument("--quiet", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    with _limit_threads():
        if args.command == "demo":
            code, _ = run_demo(args.out_dir or "out", args.seed, args.grid)
            return code
        code, summary = run_scenario(args.config, args.command, args.out_dir, args.seed, args.grid)
    if summary.get("error"):
        print(f"error: {summary['error']}", file=sys.stderr)
    if not args.quiet:
        print(json.dumps({k: summary.get(k) for k in ("status", "residuals")}, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
