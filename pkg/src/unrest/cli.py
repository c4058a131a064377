"""Command-line entry point: ``unrest <subcommand> ...``.

Exit codes: 0 success, 1 configuration error, 2 assumptions violated,
3 solver abort, 4 analysis did not converge.
"""
from __future__ import annotations

import argparse
import csv
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis
from .errors import (
    AssumptionViolation,
    ConfigError,
    ExprError,
    FrontTooClose,
    InvalidInitialData,
    ModelError,
    NoFront,
    NotConverged,
    SolverAbort,
    UnrestError,
)
from .model import c_gamma, linear_growth, q_final_tension, u_star, v_star, wave_speeds
from .ode import integrate_to_rest
from .pde import simulate
from .scenario import (
    Scenario,
    build_scenario,
    load_scenario,
    parse_overrides,
    parse_text,
    read_run,
    write_run,
    write_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTIONS, EXIT_SOLVER, EXIT_ANALYSIS = 0, 1, 2, 3, 4


def _overrides(args) -> dict:
    items = list(args.set or [])
    if getattr(args, "t_end", None) is not None:
        items.append(f"params.t_end={args.t_end}")
    if getattr(args, "snapshot_times", None) is not None:
        items.append(f"params.snapshot_times={args.snapshot_times}")
    return parse_overrides(items)


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.10g}"


# ------------------------------------------------------------------ run core

def execute(scn: Scenario):
    """Simulate, then classify and (when possible) measure the front speed."""
    th = scn.thresholds
    t_end = scn.params.t_end
    s1, s2, _ = analysis.speed_times(t_end)
    c1, c2 = th.times(t_end)
    snaps = tuple(sorted(set(scn.params.snapshot_times) | {s1, s2, c1, c2}))
    params = replace(scn.params, snapshot_times=snaps)
    run = simulate(scn.model, scn.initial_state(), scn.grid, params, side=scn.side)
    cls = analysis.classify(run, scn.model, th)
    speed = None
    if cls.verdict != "Calm":
        try:
            speed = analysis.estimate_speed(run, s1, s2, scn.model)
        except (NoFront, FrontTooClose, LookupError):
            speed = None
    return run, cls, speed


def _sweep_point(raw: dict, name: str, overrides: dict, path: str, value: str) -> dict:
    sec, key = path.split(".")
    ov = dict(overrides)
    ov[(sec, key)] = value
    row = {"parameter": path, "value": value}
    try:
        scn = build_scenario(raw, name, ov)
        br = analysis.bracket_for(scn.model)
        if br:
            row["c_b"], row["c_1"] = br
        run, cls, speed = execute(scn)
    except (SolverAbort, UnrestError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(verdict=cls.verdict, sup_u_end=cls.sup_u_end, u_center_end=cls.u_center_end,
               v_center_end=cls.v_center_end)
    if cls.v_inf_converged:
        row["v_inf"] = cls.v_inf_estimate
    if speed is not None:
        row["c"] = speed.c
    return row


def run_sweep(scn: Scenario, overrides: dict, jobs: int = 1) -> list:
    if scn.sweep is None:
        raise ConfigError(f"scenario {scn.name!r} has no [sweep] section")
    path, values = scn.sweep
    raw = {k: v for k, v in scn.raw.items() if k != "sweep"}
    base = {k: v for k, v in overrides.items() if k != tuple(path.split("."))}
    argsets = [(raw, scn.name, base, path, v) for v in values]
    if jobs <= 1:
        return [_sweep_point(*a) for a in argsets]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point, *zip(*argsets)))


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    scn = load_scenario(args.scenario, _overrides(args), validate=False)
    m = scn.model
    print(f"scenario {scn.name}: {m.describe()}")
    for line in scn.report.lines():
        print(line)
    scalars = {}
    try:
        scalars["v_star"] = v_star(m)
    except ModelError:
        scalars["v_star"] = None
    try:
        scalars["K_b"] = linear_growth(m)
    except ModelError:
        scalars["K_b"] = None
    try:
        scalars["u_star(1)"] = u_star(m, 1.0)
    except ModelError:
        scalars["u_star(1)"] = None
    try:
        scalars["c_b"], scalars["c_1"] = wave_speeds(m)
        scalars["c_gamma"] = c_gamma(m)
    except ModelError as exc:
        scalars["c_b"] = None
        scalars["c_1"] = getattr(exc, "c_1", None)
        scalars["c_gamma"] = None
    for k, v in scalars.items():
        print(f"  {k} = {_fmt(v)}")
    if not scn.report.passed:
        print("assumptions: FAIL")
        return EXIT_ASSUMPTIONS
    print("assumptions: pass")
    return EXIT_OK


def cmd_run(args) -> int:
    scn = load_scenario(args.scenario, _overrides(args))
    run, cls, speed = execute(scn)
    out = Path(args.out) if args.out else Path("runs") / scn.name
    write_run(run, out, cls, speed, scn, svg=args.svg)
    line = f"verdict: {cls.verdict}"
    if speed is not None:
        line += f"  c = {speed.c:.6g}"
        if speed.bracket:
            line += f"  [c_b, c_1] = [{speed.bracket[0]:.6g}, {speed.bracket[1]:.6g}]"
    if cls.oscillatory and cls.verdict != "Oscillatory":
        line += "  (oscillatory)"
    print(line)
    print(f"output: {out}")
    return EXIT_OK


def cmd_ode(args) -> int:
    scn = load_scenario(args.scenario, _overrides(args))
    u0 = float(scn.u0.eval(x=0.0))
    v0 = float(scn.v0.eval(x=0.0))
    traj, metrics = integrate_to_rest(scn.model, u0, v0, scn.params.dt, scn.params.t_end)
    print(f"u0 = {u0:.10g}, v0 = {v0:.10g}, integrated to t = {traj.t[-1]:g}")
    print(f"v_inf = {metrics['v_inf']:.10g}")
    print(f"u_end = {traj.u_end:.10g}")
    print(f"max_u = {metrics['max_u']:.10g} at t = {traj.t_at_max_u:g}")
    m = scn.model
    if m.g is not None and m.d2 == 0:
        try:
            q = q_final_tension(m.g, replace(m, v_b=v0))
            print(f"v_inf (Q root) = {q:.10g}")
        except ModelError as exc:
            print(f"v_inf (Q root) unavailable: {exc}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trajectory.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("t", "u", "v"))
            for row in zip(traj.t, traj.u, traj.v):
                w.writerow([format(float(a), ".17g") for a in row])
    return EXIT_OK


def _run_dir_model(run_dir: Path, args):
    p = run_dir / "scenario.scn"
    if not p.exists():
        return None
    return build_scenario(parse_text(p.read_text(), str(p)), run_dir.name, _overrides(args))


def cmd_speed(args) -> int:
    d = Path(args.run_dir)
    run = read_run(d)
    scn = _run_dir_model(d, args)
    t1, t2 = args.t1, args.t2
    if t1 is None or t2 is None:
        d1, d2, _ = analysis.speed_times(run.params.t_end)
        t1 = d1 if t1 is None else t1
        t2 = d2 if t2 is None else t2
    est = analysis.estimate_speed(run, t1, t2, scn.model if scn else None)
    print(f"c = {est.c:.10g}  (x1 = {est.x1:.6g} at t1 = {t1:g}, x2 = {est.x2:.6g} at t2 = {t2:g}, side {est.side})")
    if est.bracket:
        print(f"bracket [c_b, c_1] = [{est.bracket[0]:.10g}, {est.bracket[1]:.10g}]")
    return EXIT_OK


def cmd_classify(args) -> int:
    d = Path(args.run_dir)
    run = read_run(d)
    scn = _run_dir_model(d, args)
    if scn is None:
        raise ConfigError(f"{d} has no scenario.scn; classification needs the model")
    cls = analysis.classify(run, scn.model, scn.thresholds)
    print(f"verdict: {cls.verdict}")
    for k, v in cls.evidence().items():
        print(f"  {k} = {v}")
    return EXIT_OK


def cmd_scan(args) -> int:
    ov = _overrides(args)
    scn = load_scenario(args.scenario, ov)
    rows = run_sweep(scn, ov, args.jobs)
    out = Path(args.out) if args.out else Path("runs") / f"scan_{scn.name}"
    out.mkdir(parents=True, exist_ok=True)
    write_sweep(rows, out / "sweep.csv")
    for r in rows:
        c = r.get("c")
        vi = r.get("v_inf")
        print(f"{r['parameter']} = {r['value']}: {r.get('verdict', r.get('error'))}"
              + (f"  c = {c:.6g}" if c is not None else "")
              + (f"  c_b = {r['c_b']:.6g}" if r.get("c_b") is not None else "")
              + (f"  v_inf = {vi:.6g}" if vi is not None else ""))
    print(f"output: {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_eig(args) -> int:
    scn = load_scenario(args.scenario, _overrides(args))
    x = scn.grid.x
    prof_expr = scn.v_profile if scn.v_profile is not None else scn.v0
    profile = np.array(prof_expr.eval_on(x.shape, x=x), dtype=float)
    res = analysis.principal_eigenvalue(scn.model, profile, scn.grid)
    print(f"lambda_b = {res.lambda_b:.12g}  (iterations {res.iterations}, residual {res.residual:.3g})")
    out = Path(args.out) if args.out else Path("runs") / f"eig_{scn.name}"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eigenvector.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("x", "v_b", "phi"))
        for row in zip(x, profile, res.eigenvector):
            w.writerow([format(float(a), ".17g") for a in row])
    print(f"eigenvector: {out / 'eigenvector.csv'}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unrest", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a scenario value (repeatable; last wins)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--t-end", type=float, dest="t_end", help="override params.t_end")
        sp.add_argument("--snapshot-times", dest="snapshot_times", help="comma-separated times")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    sp = sub.add_parser("validate", help="check the standing assumptions and print derived scalars")
    common(sp)
    sp.set_defaults(fn=cmd_validate)
    sp = sub.add_parser("run", help="simulate, classify and write a run directory")
    common(sp)
    sp.add_argument("--svg", action="store_true", help="also write one SVG per snapshot")
    sp.set_defaults(fn=cmd_run)
    sp = sub.add_parser("ode", help="integrate the space-homogeneous system to rest")
    common(sp)
    sp.set_defaults(fn=cmd_ode)
    sp = sub.add_parser("speed", help="measure the front speed of an existing run directory")
    sp.add_argument("run_dir")
    common(sp, scenario=False)
    sp.add_argument("--t1", type=float)
    sp.add_argument("--t2", type=float)
    sp.set_defaults(fn=cmd_speed)
    sp = sub.add_parser("classify", help="classify an existing run directory")
    sp.add_argument("run_dir")
    common(sp, scenario=False)
    sp.set_defaults(fn=cmd_classify)
    sp = sub.add_parser("scan", help="run the scenario's [sweep]")
    common(sp)
    sp.set_defaults(fn=cmd_scan)
    sp = sub.add_parser("eig", help="principal eigenvalue of the linearization at (0, v_b(x))")
    common(sp)
    sp.set_defaults(fn=cmd_eig)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.simplefilter("default")
    try:
        return args.fn(args)
    except AssumptionViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in exc.report.lines():
            print(line, file=sys.stderr)
        return EXIT_ASSUMPTIONS
    except (ConfigError, ExprError, InvalidInitialData, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverAbort as exc:
        print(f"solver abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (NotConverged, NoFront, LookupError) as exc:
        print(f"not converged: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
