"""Command-line harness: ``plan``, ``simulate``, ``sweep`` and ``reproduce``.

Exit codes
----------
0  success
1  ``reproduce``: at least one acceptance check failed
2  usage or scenario-file error
3  boundary conditions are not at rest
4  integrator failure (step limit, non-finite state)
5  transform singularity (|theta| too close to pi/2)
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, experiments as ex
from .errors import (ChainMotionError, NearSingularity, NonFiniteState,
                     NonRestBoundary, StepLimitExceeded, UnknownComponent)
from .integrator import SolverConfig
from .manipulator import ManipulatorParams
from .simulation import Scenario, SimResult, perturb, run, sweep, write_csv
from .tracker import PdGains

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NONREST = 3
EXIT_INTEGRATOR = 4
EXIT_SINGULAR = 5


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- config

_TOP_KEYS = {"plant", "x0", "target", "T", "gains", "params", "perturbation", "solver"}
_SECTION_KEYS = {
    "gains": {"kp", "kd"},
    "params": {"m3", "d3", "I3"},
    "perturbation": {"component", "fraction"},
    "solver": {"rel_tol", "abs_tol", "h_init", "h_max", "max_steps"},
}


def _number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite")
    return float(value)


def _vector(value, key: str) -> list[float]:
    if not isinstance(value, list) or len(value) not in (3, 6):
        raise ConfigError(f"{key}: expected a list of 3 positions or 6 state values")
    return [_number(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _section(doc: dict, name: str) -> dict | None:
    sec = doc.get(name)
    if sec is None:
        return None
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected an object")
    unknown = sorted(set(sec) - _SECTION_KEYS[name])
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown key")
    return sec


def scenario_from_dict(doc) -> Scenario:
    """Build a :class:`Scenario` from a parsed scenario document.

    Unknown keys are rejected; the error message names the offending key.
    """
    if not isinstance(doc, dict):
        raise ConfigError("scenario file must contain a JSON object")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    for key in ("plant", "x0", "target"):
        if key not in doc:
            raise ConfigError(f"{key}: missing required key")
    plant = doc["plant"]
    if plant not in ("chained", "manipulator"):
        raise ConfigError(f"plant: expected 'chained' or 'manipulator', got {plant!r}")

    kw = {
        "plant": plant,
        "x0": _vector(doc["x0"], "x0"),
        "target": _vector(doc["target"], "target"),
    }
    if "T" in doc:
        kw["T"] = _number(doc["T"], "T")
        if kw["T"] <= 0:
            raise ConfigError("T: must be positive")
    if (g := _section(doc, "gains")) is not None:
        kw["gains"] = PdGains(**{k: _number(v, f"gains.{k}") for k, v in g.items()})
    if (p := _section(doc, "params")) is not None:
        if plant != "manipulator":
            raise ConfigError("params: only valid for the manipulator plant")
        try:
            kw["params"] = ManipulatorParams(
                **{k: _number(v, f"params.{k}") for k, v in p.items()})
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from None
    if (s := _section(doc, "solver")) is not None:
        vals = {}
        for k, v in s.items():
            if v is None and k in ("h_init", "h_max"):
                continue
            if k == "max_steps":
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigError("solver.max_steps: expected an integer")
                vals[k] = v
            else:
                vals[k] = _number(v, f"solver.{k}")
        try:
            kw["solver"] = SolverConfig(**vals)
        except ValueError as exc:
            raise ConfigError(f"solver: {exc}") from None
    try:
        sc = Scenario(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if (pt := _section(doc, "perturbation")) is not None:
        if set(pt) != {"component", "fraction"}:
            raise ConfigError("perturbation: needs both 'component' and 'fraction'")
        try:
            sc = perturb(sc, str(pt["component"]),
                         _number(pt["fraction"], "perturbation.fraction"))
        except UnknownComponent as exc:
            raise ConfigError(f"perturbation.component: {exc.args[0]}") from None
    return sc


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from None
    return scenario_from_dict(doc)


# ---------------------------------------------------------------- reports

def _clean(obj):
    """Make ``obj`` JSON-safe: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def check(name: str, value: float, *, min: float | None = None,
          max: float | None = None) -> dict:
    """A pass/fail record; bounds are inclusive and absent bounds are open."""
    ok = math.isfinite(value)
    if ok and min is not None:
        ok = value >= min
    if ok and max is not None:
        ok = value <= max
    return {"name": name, "value": value, "min": min, "max": max, "passed": bool(ok)}


def _header(command: str, timestamp: bool) -> dict:
    head = {"command": command, "version": __version__}
    if timestamp:
        head["generated_at"] = datetime.now(timezone.utc).isoformat()
    return head


def _errors(result: SimResult) -> dict:
    out = {
        "chained": {"position": result.terminal_error_pos,
                    "velocity": result.terminal_error_vel},
        "native": None,
    }
    nat = result.native_terminal_error
    if nat is not None:
        out["native"] = {"position": nat[:3], "velocity": nat[3:]}
    return out


def _solver_stats(result: SimResult) -> dict:
    return {"steps": result.n_steps, "rejections": result.n_rejected,
            "evaluations": result.n_evals}


def _max_abs(v) -> float:
    return float(np.max(np.abs(v)))


def simulate_checks(result: SimResult) -> list[dict]:
    """Acceptance thresholds for an unperturbed run; none for perturbed runs."""
    sc = result.scenario
    if sc.perturbation is not None:
        return []
    if sc.plant == "chained":
        return [
            check("terminal_position_error", _max_abs(result.terminal_error_pos),
                  max=ex.CHAINED_TOL),
            check("terminal_velocity_error", _max_abs(result.terminal_error_vel),
                  max=ex.CHAINED_TOL),
        ]
    return [check("native_terminal_position_error",
                  _max_abs(result.native_terminal_error[:3]), max=ex.MANIPULATOR_TOL)]


def simulate_report(result: SimResult, timestamp: bool = True,
                    csv_path: str | None = None) -> dict:
    checks = simulate_checks(result)
    return _clean({
        **_header("simulate", timestamp),
        "scenario": result.scenario.to_dict(),
        "amplitudes": result.plan.amplitudes,
        "terminal_error": _errors(result),
        "solver": _solver_stats(result),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
        "csv": csv_path,
    })


def sweep_rows(sc: Scenario, component: str, levels, jobs: int = 1) -> list[dict]:
    i = sc.state_names.index(component)
    rows = []
    for row in sweep(sc, component, levels, jobs=jobs):
        entry = {"fraction": row.fraction, "ok": row.ok, "error": row.error,
                 "initial_error": None, "terminal_error": None,
                 "terminal_velocity_error": None, "solver": None}
        init = np.zeros(3)
        if i < 3:
            init[i] = sc.x0[i] * row.fraction
        entry["initial_error"] = init
        if row.ok:
            r = row.result
            err = r.native_terminal_error
            entry["terminal_error"] = err[:3] if err is not None else r.terminal_error_pos
            entry["terminal_velocity_error"] = (
                err[3:] if err is not None else r.terminal_error_vel)
            entry["solver"] = _solver_stats(r)
        rows.append(entry)
    return rows


def sweep_report(sc: Scenario, component: str, levels, timestamp: bool = True,
                 jobs: int = 1) -> dict:
    rows = sweep_rows(sc, component, levels, jobs)
    return _clean({
        **_header("sweep", timestamp),
        "scenario": replace(sc, perturbation=None).to_dict(),
        "component": component,
        "rows": rows,
        "passed": all(r["ok"] for r in rows),
    })


def _table_text(report: dict, names) -> str:
    head = f"{'case':>10}  {'initial error':>14}  " + "  ".join(f"{n:>13}" for n in names)
    lines = [head, "-" * len(head)]
    comp = report["component"]
    for r in report["rows"]:
        case = "baseline" if r["fraction"] == 0 else f"{r['fraction']:+.0%}"
        init = max(r["initial_error"], key=abs)
        if r["ok"]:
            cells = "  ".join(f"{v:>13.3e}" for v in r["terminal_error"])
        else:
            cells = f"FAILED ({r['error']})"
        lines.append(f"{case:>10}  {init:>14.3e}  {cells}")
    lines.append(f"(initial error and terminal error chi(5T) - chi* on {comp}; "
                 "columns are per position component)")
    return "\n".join(lines)


def _try_run(sc: Scenario):
    try:
        return run(sc), None
    except ChainMotionError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def reproduce_report(rel_tol: float | None = None, timestamp: bool = True,
                     out_dir: Path | None = None, jobs: int = 1) -> dict:
    """Run the built-in experiments and judge them against fixed thresholds."""
    chained = ex.with_rel_tol(ex.CHAINED, rel_tol)
    manip = ex.with_rel_tol(ex.MANIPULATOR, rel_tol)
    table_sc = ex.with_rel_tol(ex.MANIPULATOR_TABLE, rel_tol)
    checks: list[dict] = []
    report: dict = {**_header("reproduce", timestamp), "rel_tol_override": rel_tol,
                    "experiments": {}}

    mp = chained.make_plan()
    amp_dev = max(abs(a - b) for a, b in zip(mp.amplitudes, ex.CHAINED_AMPLITUDES))
    checks.append(check("planner_amplitudes_max_deviation", amp_dev,
                        max=ex.AMPLITUDE_TOL))

    for key, sc in (("chained", chained), ("manipulator", manip)):
        res, err = _try_run(sc)
        entry = {"scenario": sc.to_dict(), "amplitudes": sc.make_plan().amplitudes,
                 "error": err}
        if res is None:
            checks.append(check(f"{key}_run_completed", math.nan))
        else:
            entry.update(terminal_error=_errors(res), solver=_solver_stats(res))
            checks += [dict(c, name=f"{key}_{c['name']}") for c in simulate_checks(res)]
            if out_dir is not None:
                path = out_dir / f"{key}.csv"
                with open(path, "w", newline="") as fh:
                    write_csv(res, fh)
                entry["csv"] = str(path)
        report["experiments"][key] = entry

    # commonly quoted chained-coordinate values are rounded; runs use exact transforms
    xi0 = manip.to_chained(manip.x0)[:3]
    xi_t = manip.to_chained(manip.target)[:3]
    report["transform_rounding"] = {
        "xi0_exact": xi0, "xi0_rounded": ex.MANIPULATOR_XI0_ROUNDED,
        "target_exact": xi_t, "target_rounded": ex.MANIPULATOR_TARGET_ROUNDED,
        "max_deviation": max(_max_abs(xi0 - ex.MANIPULATOR_XI0_ROUNDED),
                             _max_abs(xi_t - ex.MANIPULATOR_TARGET_ROUNDED)),
    }

    rows = sweep_rows(table_sc, ex.TABLE_COMPONENT, ex.TABLE_LEVELS, jobs=jobs)
    report["experiments"]["initial_error_table"] = {
        "scenario": table_sc.to_dict(), "component": ex.TABLE_COMPONENT, "rows": rows}
    for r in rows:
        frac = r["fraction"]
        label = "baseline" if frac == 0 else f"{frac:+.2f}"
        if not r["ok"]:
            checks.append(check(f"table_{label}_run_completed", math.nan))
            continue
        err = np.asarray(r["terminal_error"])
        if frac == 0:
            checks.append(check("table_baseline_max_abs_error", _max_abs(err),
                                max=ex.TABLE_BASELINE_TOL))
            continue
        ref_x = ex.TABLE_TERMINAL_ERRORS[frac][0]
        checks.append(check(f"table_{label}_x_error_ratio_to_reference",
                            float(err[0] / ref_x),
                            min=1 / ex.TABLE_FACTOR, max=ex.TABLE_FACTOR))
        checks.append(check(f"table_{label}_theta_to_x_error_ratio",
                            abs(float(err[2])) / abs(float(err[0])), max=1.0))

    # tracking error on xi2 must shrink between t = T and t = 5T (+10% case)
    plus10, err = _try_run(perturb(table_sc, ex.TABLE_COMPONENT, 0.10))
    if plus10 is None:
        checks.append(check("xi2_tracking_error_ratio_5T_to_T", math.nan))
    else:
        T = plus10.plan.T
        e_T = abs(plus10.tracking_error(T)[1])
        e_5T = abs(plus10.tracking_error(5 * T)[1])
        checks.append(check("xi2_tracking_error_ratio_5T_to_T", e_5T / e_T, max=1.0))

    report["checks"] = checks
    report["passed"] = all(c["passed"] for c in checks)
    return _clean(report)


def _checks_text(report: dict) -> str:
    lines = []
    for c in report["checks"]:
        bounds = []
        if c["min"] is not None:
            bounds.append(f">= {c['min']:.3g}")
        if c["max"] is not None:
            bounds.append(f"<= {c['max']:.3g}")
        value = "n/a" if c["value"] is None else f"{c['value']:.3e}"
        status = "PASS" if c["passed"] else "FAIL"
        lines.append(f"[{status}] {c['name']}: {value} ({', '.join(bounds)})")
    lines.append("all checks passed" if report["passed"] else "some checks FAILED")
    return "\n".join(lines)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False)


# ---------------------------------------------------------------- commands

def _override(sc: Scenario, rel_tol: float | None) -> Scenario:
    return ex.with_rel_tol(sc, rel_tol)


def cmd_plan(args) -> int:
    sc = load_scenario(args.config)
    print(_dump(_clean(sc.make_plan().to_dict())))
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _override(load_scenario(args.config), args.rel_tol)
    result = run(sc)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(result, fh)
    print(_dump(simulate_report(result, not args.no_timestamp, args.out)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = _override(load_scenario(args.config), args.rel_tol)
    if args.component not in sc.state_names:
        raise ConfigError(f"--component: {args.component!r} is not one of "
                          f"{', '.join(sc.state_names)}")
    report = sweep_report(sc, args.component, args.levels, not args.no_timestamp,
                          jobs=args.jobs)
    if args.json:
        print(_dump(report))
    else:
        print(_table_text(report, sc.state_names[:3]))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    report = reproduce_report(args.rel_tol, not args.no_timestamp, out_dir, args.jobs)
    print(_dump(report) if args.json else _checks_text(report))
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def _positive_float(text: str) -> float:
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chainmotion",
        description="Rest-to-rest planning and PD tracking for the second-order "
                    "chained form and a 3-joint underactuated manipulator.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--rel-tol", type=_positive_float, default=None,
                       help="override the solver relative tolerance")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit generated_at from reports")

    p = sub.add_parser("plan", help="print the five-step motion plan as JSON")
    p.add_argument("--config", required=True, help="scenario JSON file")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="run one scenario, write CSV and a JSON report")
    common(p)
    p.add_argument("--out", help="CSV trajectory output path")
    p.add_argument("--json", action="store_true",
                   help="accepted for symmetry; the report is always JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="terminal errors under initial-state perturbations")
    common(p)
    p.add_argument("--component", default="theta",
                   help="native state component to perturb (default: theta)")
    p.add_argument("--levels", type=float, nargs="*", default=[],
                   help="signed relative perturbations, e.g. 0.01 -0.01 0.1")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run the built-in experiments and checks")
    common(p, config=False)
    p.add_argument("--out", help="directory for experiment CSV files")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonRestBoundary as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONREST
    except NearSingularity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (StepLimitExceeded, NonFiniteState) as exc:
        print(f"error: integrator failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    except ChainMotionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
