"""Command-line front end.

    einwarp verify scenario.json
    einwarp catalog --name affine_conformal --n 3 --m 2 --G 1 --C 5
    einwarp integrate --phi0 5 --dphi0 -1 --G0 1 --lambda -4 --span 0 4
    einwarp scan ranges.json

Exit status: 0 pass, 1 residual failure, 2 usage/parse/singularity error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
import time
from decimal import Decimal, InvalidOperation
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .catalog import CATALOG, exponential_finding, verify_catalog_entry
from .curvature import ANALYTIC, FD
from .reduction import (
    InadmissibleInitialData,
    NegativeRadicand,
    ReducedParams,
    ReducedState,
    G_of,
    admissible_initial_data,
    constraint,
    evolution,
    integrate_reduced,
    lift_and_verify,
)
from .warp import (
    FIBERS,
    assemble_warped_metric,
    cross_validate,
    default_tolerance,
    einstein_residual,
    oneill_residuals,
    scalar_identities,
)

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2

_number = {"type": ["number", "string"]}
_grid = {
    "type": "object",
    "properties": {"count": {"type": "integer", "minimum": 1}, "seed": {"type": "integer"}, "margin": _number},
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["verify", "oneill", "reduce", "integrate", "catalog", "scan"]},
        "name": {"enum": sorted(CATALOG)},
        "variant": {"enum": ["statement", "proof"]},
        "n": {"type": "integer", "minimum": 3},
        "m": {"type": "integer", "minimum": 2},
        "G": _number,
        "C": _number,
        "Theta": _number,
        "A": _number,
        "kappa": {"enum": [1, -1]},
        "lambda": _number,
        "mu": _number,
        "phi0": _number,
        "dphi0": _number,
        "G0": _number,
        "step": _number,
        "span": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "fiber": {"enum": sorted(FIBERS)},
        "grid": _grid,
        "tolerance": _number,
        "mode": {"enum": [ANALYTIC, FD]},
        "output": {"type": "string"},
        "csv": {"type": "string"},
        "ranges": {
            "type": "object",
            "properties": {
                k: {"type": "array", "items": _number}
                for k in ("lambda", "dphi0", "phi0", "kappa", "n", "m")
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ScenarioError(Exception):
    pass


def _num(value, default=None) -> float | None:
    if value is None:
        return default
    try:
        return float(Decimal(str(value)))
    except InvalidOperation as exc:
        raise ScenarioError(f"not a number: {value!r}") from exc


def load_scenario(path: str | os.PathLike) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        scenario = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        jsonschema.validate(scenario, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{path}: schema violation at {where}: {exc.message}") from exc
    if scenario["kind"] in ("verify", "oneill", "catalog") and "name" not in scenario:
        raise ScenarioError(f"{path}: kind {scenario['kind']!r} needs a family 'name'")
    return scenario


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _entry_from(scenario: dict):
    name = scenario["name"]
    if name == "flat_exponential":
        kwargs = {"theta": _num(scenario.get("Theta"), 1.0), "A": _num(scenario.get("A"), 1.0)}
    elif name == "affine_conformal":
        kwargs = {
            "G": _num(scenario.get("G"), 1.0),
            "C": _num(scenario.get("C"), 5.0),
            "theta": _num(scenario.get("Theta"), 1.0),
            "kappa": int(scenario.get("kappa", 1)),
        }
    else:
        kwargs = {"variant": scenario.get("variant", "statement")}
    return CATALOG[name](n=int(scenario.get("n", 3)), m=int(scenario.get("m", 2)), **kwargs)


def _grid_opts(scenario: dict) -> dict:
    g = scenario.get("grid", {})
    return {"count": int(g.get("count", 100)), "seed": int(g.get("seed", 0)), "margin": _num(g.get("margin"), 0.1)}


def _finish(report: dict, passed: bool, started: float) -> dict:
    report["verdict"] = "pass" if passed else "fail"
    report["wall_time_s"] = round(time.perf_counter() - started, 6)
    return report


def _header(scenario: dict, mode: str, tol: float) -> dict:
    return {"scenario": scenario, "version": __version__, "mode": mode, "tolerance": tol}


def run_catalog(scenario: dict) -> dict:
    started = time.perf_counter()
    mode = scenario.get("mode", ANALYTIC)
    tol = _num(scenario.get("tolerance"), default_tolerance(mode))
    entry = _entry_from(scenario)
    grid = entry.spec.with_mode(mode).grid(**_grid_opts(scenario))
    verification = verify_catalog_entry(entry, grid, tol, mode)
    report = _header(scenario, mode, tol)
    report["family"] = entry.name
    report["claimed_lambda_paper"] = entry.claimed_lambda_paper
    report["derived_lambda"] = entry.derived_lambda
    report["results"] = verification.summary()
    report["sup_norms"] = {
        label: {"einstein": e.sup, "oneill": o.sup} for label, (e, o) in verification.reports.items()
    }
    report["best_fit_lambda"] = next(iter(verification.reports.values()))[0].best_fit_lambda
    report["notes"] = list(entry.notes)
    if entry.name == "flat_exponential":
        found = exponential_finding(entry, grid)
        report["notes"].append(
            f"printed claim: Einstein with lambda = {entry.claimed_lambda_paper:g}; measured horizontal sup = "
            f"{found['horizontal_sup']:.12g} (m A^2 = {found['mA2']:g}), scalar residual = "
            f"m A^2 f^2 to {found['scalar_over_f2_deviation']:.3g}"
        )
    return _finish(report, verification.passed, started)


def run_verify(scenario: dict, with_blocks: bool = False) -> dict:
    started = time.perf_counter()
    mode = scenario.get("mode", ANALYTIC)
    tol = _num(scenario.get("tolerance"), default_tolerance(mode))
    entry = _entry_from(scenario)
    spec = entry.spec.with_mode(mode)
    grid = spec.grid(**_grid_opts(scenario))
    default_lam = entry.derived_lambda if entry.derived_lambda is not None else entry.claimed_lambda_paper
    lam = _num(scenario.get("lambda"), default_lam)
    mu = _num(scenario.get("mu"), spec.fiber.mu_claim)
    report = _header(scenario, mode, tol)
    report["family"] = entry.name
    reports = [einstein_residual(assemble_warped_metric(spec), lam, grid, tol)]
    if with_blocks:
        reports.append(oneill_residuals(spec, lam, mu, grid, tol))
        reports.append(scalar_identities(spec, lam, mu, grid, tol))
        xv = cross_validate(spec, lam, mu, grid, tol)
        report["cross_validation"] = {k: xv[k] for k in ("direct", "blocks", "ratio", "agree")}
    report["lambda"] = lam
    report["best_fit_lambda"] = reports[0].best_fit_lambda
    report["reports"] = [r.to_dict() for r in reports]
    report["sup_norms"] = {r.title: r.sup for r in reports}
    report["notes"] = list(entry.notes)
    passed = all(r.passed for r in reports)
    return _finish(report, passed, started)


def run_reduce(scenario: dict) -> dict:
    started = time.perf_counter()
    tol = _num(scenario.get("tolerance"), 1e-8)
    params = ReducedParams(int(scenario.get("n", 3)), int(scenario.get("m", 2)), _num(scenario.get("lambda"), 0.0), int(scenario.get("kappa", 1)))
    phi0, dphi0 = _num(scenario.get("phi0"), 1.0), _num(scenario.get("dphi0"), 0.0)
    roots = admissible_initial_data(phi0, dphi0, params)
    rows = [_root_row(phi0, dphi0, g, params) for g in roots]
    report = _header(scenario, ANALYTIC, tol)
    report["roots"] = roots
    report["rows"] = rows
    report["notes"] = [] if roots else ["no real roots: negative discriminant"]
    passed = bool(roots) and all(abs(r["constraint"]) <= tol for r in rows)
    return _finish(report, passed, started)


def _root_row(phi0, dphi0, g0, params) -> dict:
    state = np.array([phi0, dphi0, g0])
    ddphi = evolution(state, params)[1]
    rbar = params.kappa * (params.n - 1) * (2 * phi0 * ddphi - params.n * dphi0**2)
    try:
        g_def = G_of(params.lam, rbar, params.kappa, params.n, params.m)
        g_gap: float | str = abs(g_def * g_def - g0 * g0)
    except NegativeRadicand:
        g_gap = "NegativeRadicand"
    return {"G0": g0, "constraint": constraint(state, params), "Rbar": rbar, "G_definition_gap": g_gap}


def run_integrate(scenario: dict) -> tuple[dict, str]:
    started = time.perf_counter()
    tol = _num(scenario.get("tolerance"), 1e-5)
    params = ReducedParams(int(scenario.get("n", 3)), int(scenario.get("m", 2)), _num(scenario.get("lambda"), 0.0), int(scenario.get("kappa", 1)))
    span = [_num(s) for s in scenario.get("span", [0, 1])]
    initial = ReducedState(span[0], _num(scenario.get("phi0"), 1.0), _num(scenario.get("dphi0"), 0.0), _num(scenario.get("G0"), 0.0))
    traj = integrate_reduced(initial, params, _num(scenario.get("step"), 1e-3), tuple(span), estimate_error=True)
    report = _header(scenario, ANALYTIC, tol)
    report["steps"] = len(traj) - 1
    report["final"] = {"xi": float(traj.xi[-1]), "phi": float(traj.phi[-1]), "dphi": float(traj.dphi[-1]), "G": float(traj.G[-1])}
    report["monitor_max"] = float(np.max(np.abs(traj.monitor)))
    report["error_estimate"] = traj.error_estimate
    if not traj.completed:
        report["diagnostic"] = traj.diagnostic
        report["halted_at"] = traj.halted_at
        report["verdict"] = "error"
        report["wall_time_s"] = round(time.perf_counter() - started, 6)
        return report, traj.to_csv()
    fiber = FIBERS["flat"](params.m)
    lifted = lift_and_verify(traj, _num(scenario.get("Theta"), 1.0), fiber, tolerance=tol, seed=_grid_opts(scenario)["seed"])
    report["lift"] = lifted.to_dict()
    report["sup_norms"] = {"lifted": lifted.sup}
    report["best_fit_lambda"] = lifted.best_fit_lambda
    return _finish(report, lifted.passed, started), traj.to_csv()


SCAN_COLUMNS = ["n", "m", "kappa", "lambda", "phi0", "dphi0", "roots", "constraint_residuals", "G_definition_gaps", "verdict"]


def scan(ranges: dict, defaults: dict | None = None) -> str:
    """One CSV row per parameter combination; empty root sets are kept as rows."""
    defaults = {"n": 3, "m": 2, "kappa": 1, "lambda": 0.0, "phi0": 1.0, "dphi0": 0.0, **(defaults or {})}
    axes = {k: [v] for k, v in defaults.items()}
    for k, values in ranges.items():
        axes[k] = list(values)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    if any(len(v) == 0 for v in axes.values()):
        return buf.getvalue()
    keys = ["n", "m", "kappa", "lambda", "phi0", "dphi0"]
    for combo in itertools.product(*(axes[k] for k in keys)):
        n, m, kappa, lam, phi0, dphi0 = combo
        params = ReducedParams(int(n), int(m), _num(lam), int(kappa))
        roots = admissible_initial_data(_num(phi0), _num(dphi0), params)
        if roots:
            rows = [_root_row(_num(phi0), _num(dphi0), g, params) for g in roots]
            cells = [
                ";".join(repr(g) for g in roots),
                ";".join(f"{r['constraint']:.3e}" for r in rows),
                ";".join(r["G_definition_gap"] if isinstance(r["G_definition_gap"], str) else f"{r['G_definition_gap']:.3e}" for r in rows),
                "admissible",
            ]
        else:
            cells = ["no real roots", "", "", "inadmissible"]
        w.writerow([int(n), int(m), int(kappa), _num(lam), _num(phi0), _num(dphi0), *cells])
    return buf.getvalue()


def run_scan(scenario: dict) -> str:
    defaults = {k: scenario[k] for k in ("n", "m", "kappa", "lambda", "phi0", "dphi0") if k in scenario}
    return scan(scenario.get("ranges", {}), defaults)


def run(path: str | os.PathLike, out: str | None = None, overrides: dict | None = None) -> int:
    """Run one scenario file and write its report; returns the exit status."""
    try:
        scenario = load_scenario(path)
        scenario.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return _dispatch(scenario, out)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _dispatch(scenario: dict, out: str | None) -> int:
    kind = scenario["kind"]
    out = out or scenario.get("output")
    try:
        if kind == "scan":
            text = run_scan(scenario)
            _emit(text, out)
            return EXIT_PASS
        if kind == "integrate":
            report, table = run_integrate(scenario)
            if scenario.get("csv"):
                write_atomic(scenario["csv"], table)
        elif kind == "catalog":
            report = run_catalog(scenario)
        elif kind == "verify":
            report = run_verify(scenario)
        elif kind == "oneill":
            report = run_verify(scenario, with_blocks=True)
        else:
            report = run_reduce(scenario)
    except (InadmissibleInitialData, NegativeRadicand, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _emit(json.dumps(report, indent=2, ensure_ascii=False, default=_jsonable) + "\n", out)
    if report["verdict"] == "error":
        print(f"error: {report.get('diagnostic')} at xi={report.get('halted_at')}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_PASS if report["verdict"] == "pass" else EXIT_FAIL


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance", type=str)
    common.add_argument("--mode", choices=[ANALYTIC, FD])
    common.add_argument("--out")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="einwarp", description="Einstein warped-product verification engine")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run a scenario file")
    p.add_argument("file")

    p = sub.add_parser("catalog", parents=[common], help="verify a named family")
    p.add_argument("--name", choices=sorted(CATALOG))
    p.add_argument("--list", action="store_true")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=2)
    for opt in ("--G", "--C", "--Theta", "--A"):
        p.add_argument(opt, type=str)
    p.add_argument("--kappa", type=int, choices=[1, -1])
    p.add_argument("--variant", choices=["statement", "proof"])
    p.add_argument("--count", type=int, default=100)

    p = sub.add_parser("integrate", parents=[common], help="integrate the reduced system and lift it")
    for opt in ("--phi0", "--dphi0", "--G0"):
        p.add_argument(opt, type=str, required=True)
    p.add_argument("--lambda", dest="lam", type=str, required=True)
    p.add_argument("--kappa", type=int, choices=[1, -1], default=1)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--Theta", type=str)
    p.add_argument("--step", type=str, default="1e-3")
    p.add_argument("--span", type=str, nargs=2, required=True)
    p.add_argument("--csv", help="trajectory CSV path")

    p = sub.add_parser("scan", parents=[common], help="tabulate admissible G roots over parameter ranges")
    p.add_argument("file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_PASS

    grid_override = {"seed": args.seed} if args.seed is not None else None
    common = {"tolerance": args.tolerance, "mode": args.mode}

    if args.command in ("verify", "scan"):
        overrides = dict(common)
        if grid_override:
            try:
                base = load_scenario(args.file).get("grid", {})
            except ScenarioError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_ERROR
            overrides["grid"] = {**base, **grid_override}
        if args.command == "scan":
            try:
                scenario = load_scenario(args.file)
            except (ScenarioError, OSError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_ERROR
            if scenario["kind"] != "scan":
                scenario = {"kind": "scan", "ranges": scenario.get("ranges", {})}
            return _dispatch(scenario, args.out)
        return run(args.file, args.out, overrides)

    if args.command == "catalog":
        if args.list or not args.name:
            for name, ctor in sorted(CATALOG.items()):
                print(f"{name}: {(ctor.__doc__ or '').strip().splitlines()[0]}")
            return EXIT_PASS
        scenario = {"kind": "catalog", "name": args.name, "n": args.n, "m": args.m}
        for key in ("G", "C", "Theta", "A", "kappa", "variant"):
            if getattr(args, key) is not None:
                scenario[key] = getattr(args, key)
        scenario["grid"] = {"count": args.count, "seed": args.seed or 0}
    else:
        scenario = {
            "kind": "integrate",
            "phi0": args.phi0,
            "dphi0": args.dphi0,
            "G0": args.G0,
            "lambda": args.lam,
            "kappa": args.kappa,
            "n": args.n,
            "m": args.m,
            "step": args.step,
            "span": list(args.span),
        }
        if args.Theta is not None:
            scenario["Theta"] = args.Theta
        if args.csv:
            scenario["csv"] = args.csv
        if args.seed is not None:
            scenario["grid"] = {"seed": args.seed}
    scenario.update({k: v for k, v in common.items() if v is not None})
    try:
        jsonschema.validate(scenario, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_ERROR
    return _dispatch(scenario, args.out)


if __name__ == "__main__":
    sys.exit(main())
