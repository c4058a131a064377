"""Scenario files (INI-style) and run/sweep serialization.

Schema, all values are strings; scalars may be closed expressions over the
[constants] section (e.g. ``omega = 1/3``)::

    [model]      d1 d2 omega r f psi v_b [mask] [g]
    [constants]  any name = value
    [grid]       half_width dx
    [params]     dt t_end snapshot_times series_stride side
    [initial]    u0 v0            (v_b is visible as a constant)
    [analysis]   eps_calm eps_level window t1 t2 terrace_ratio v_profile ...
    [sweep]      parameter values

Output files::

    snapshots.ndjson  {"t": .., "x": [..], "u": [..], "v": [..]} per line
    series.csv        t,sup_u,u_center,v_center,front_x
    summary.csv       SUMMARY_COLUMNS
    sweep.csv         SWEEP_COLUMNS
    run.json          grid, params, side, model fingerprint
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import warnings
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import Classification, SpeedEstimate, Thresholds
from .errors import AssumptionViolation, ConfigSchema, ConfigSyntax, ExprError, FieldError
from .expr import CompiledExpr, compile_source, constant_value
from .model import AssumptionReport, ModelSpec, validate_model
from .pde import GridSpec, RunRecord, SimParams, State

SCHEMA = {
    "model": {"required": ("d1", "d2", "omega", "r", "f", "psi", "v_b"), "optional": ("mask", "g")},
    "constants": None,  # free-form
    "grid": {"required": (), "optional": ("half_width", "dx")},
    "params": {"required": (), "optional": ("dt", "t_end", "snapshot_times", "series_stride", "side")},
    "initial": {"required": ("u0",), "optional": ("v0",)},
    "analysis": {"required": (), "optional": tuple(f.name for f in fields(Thresholds)) + ("v_profile",)},
    "sweep": {"required": ("parameter", "values"), "optional": ()},
}
REQUIRED_SECTIONS = ("model", "initial")
SERIES_COLUMNS = ("t", "sup_u", "u_center", "v_center", "front_x")
SUMMARY_COLUMNS = ("verdict", "sup_u_end", "u_center_end", "v_center_end", "v_inf_estimate",
                   "v_inf_converged", "front_speed_outer", "front_speed_inner", "oscillation_count",
                   "oscillatory", "c", "c_b", "c_1", "notes")
SWEEP_COLUMNS = ("parameter", "value", "verdict", "c", "c_b", "c_1", "v_inf", "sup_u_end",
                 "u_center_end", "v_center_end", "error")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else format(x, ".17g")


# ------------------------------------------------------------------ scenario

@dataclass(frozen=True)
class Scenario:
    name: str
    raw: dict  # section -> {key: string}, overrides applied
    model: ModelSpec
    constants: dict
    grid: GridSpec
    params: SimParams
    side: str
    u0: CompiledExpr
    v0: CompiledExpr
    thresholds: Thresholds
    report: AssumptionReport
    v_profile: Optional[CompiledExpr] = None
    sweep: Optional[tuple] = None  # (dotted parameter, values)

    def initial_state(self) -> State:
        from .pde import initial_state
        return initial_state(self.grid, self.u0, self.v0)

    def to_text(self) -> str:
        lines = []
        for sec, kv in self.raw.items():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in kv.items()]
            lines.append("")
        return "\n".join(lines)

    def with_overrides(self, overrides) -> "Scenario":
        return build_scenario(self.raw, self.name, overrides)


def bundled_names() -> list:
    return sorted(p.name for p in resources.files("unrest.scenarios").iterdir() if p.name.endswith(".scn"))


def resolve_path(path) -> Path:
    """A local path if it exists, else a bundled scenario of that name."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".scn") else p.name + ".scn"
    bundled = resources.files("unrest.scenarios") / name
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no scenario file {path!r} (bundled: {', '.join(bundled_names())})")


def parse_text(text: str, source: str = "<string>") -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   delimiters=("=",), empty_lines_in_values=False)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigSyntax("key outside any section", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigSyntax(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigSyntax(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigSyntax("expected 'key = value'", lineno, 1) from None
    return {sec: dict(cp[sec]) for sec in cp.sections()}


def parse_overrides(items) -> dict:
    """``["model.v_b=0.9", ...]`` -> {("model", "v_b"): "0.9"}; later entries win."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigSchema(f"override {item!r} is not of the form section.key=value")
        path, value = item.split("=", 1)
        path = path.strip()
        if path.count(".") != 1:
            raise ConfigSchema(f"override path {path!r} must be section.key")
        sec, key = path.split(".")
        if (sec, key) in out and out[(sec, key)] != value.strip():
            warnings.warn(f"override {path} given more than once; using {value.strip()!r}", stacklevel=2)
        out[(sec, key)] = value.strip()
    return out


def _check_schema(raw: dict) -> None:
    for sec, kv in raw.items():
        if sec not in SCHEMA:
            raise ConfigSchema(f"unknown section [{sec}]")
        spec = SCHEMA[sec]
        if spec is None:
            continue
        allowed = set(spec["required"]) | set(spec["optional"])
        for key in kv:
            if key not in allowed:
                raise ConfigSchema(f"unknown key {key!r} in [{sec}]")
        for key in spec["required"]:
            if key not in kv:
                raise ConfigSchema(f"missing key {key!r} in [{sec}]")
    for sec in REQUIRED_SECTIONS:
        if sec not in raw:
            raise ConfigSchema(f"missing section [{sec}]")


def _scalar(raw: dict, sec: str, key: str, constants: dict, default=None) -> float:
    src = raw.get(sec, {}).get(key)
    if src is None:
        if default is None:
            raise ConfigSchema(f"missing key {key!r} in [{sec}]")
        return default
    try:
        return constant_value(src, constants)
    except ExprError as exc:
        raise FieldError(f"{sec}.{key}", exc) from None


def _expr(raw: dict, sec: str, key: str, allowed, constants: dict) -> Optional[CompiledExpr]:
    src = raw.get(sec, {}).get(key)
    if src is None:
        return None
    try:
        return compile_source(src, allowed, constants)
    except ExprError as exc:
        raise FieldError(f"{sec}.{key}", exc) from None


def build_scenario(raw: dict, name: str = "scenario", overrides=None, validate: bool = True) -> Scenario:
    raw = {sec: dict(kv) for sec, kv in raw.items()}
    ov = overrides if isinstance(overrides, dict) else parse_overrides(overrides)
    for (sec, key), value in ov.items():
        raw.setdefault(sec, {})[key] = value
    _check_schema(raw)

    constants = {}
    for key, src in raw.get("constants", {}).items():
        try:
            constants[key] = constant_value(src, constants)
        except ExprError as exc:
            raise FieldError(f"constants.{key}", exc) from None

    m = raw["model"]
    d1 = _scalar(raw, "model", "d1", constants)
    d2 = _scalar(raw, "model", "d2", constants)
    omega = _scalar(raw, "model", "omega", constants)
    v_b = _scalar(raw, "model", "v_b", constants)
    model = ModelSpec(
        d1=d1, d2=d2, omega=omega,
        r=_expr(raw, "model", "r", ("v",), constants),
        f=_expr(raw, "model", "f", ("u",), constants),
        psi=_expr(raw, "model", "psi", ("u", "v", "x"), constants),
        v_b=v_b,
        mask=_expr(raw, "model", "mask", ("x",), constants) if "mask" in m else None,
        g=_expr(raw, "model", "g", ("v",), constants) if "g" in m else None,
    )

    try:
        grid = GridSpec(_scalar(raw, "grid", "half_width", constants, 400.0),
                        _scalar(raw, "grid", "dx", constants, 1.0))
    except ValueError as exc:
        raise ConfigSchema(f"[grid]: {exc}") from None

    p = raw.get("params", {})
    snaps = ()
    if p.get("snapshot_times", "").strip():
        try:
            snaps = tuple(constant_value(s, constants) for s in p["snapshot_times"].split(","))
        except ExprError as exc:
            raise FieldError("params.snapshot_times", exc) from None
    stride = _scalar(raw, "params", "series_stride", constants, 20.0)
    if stride != int(stride):
        raise ConfigSchema("params.series_stride must be an integer")
    try:
        params = SimParams(_scalar(raw, "params", "dt", constants, 0.05),
                           _scalar(raw, "params", "t_end", constants, 400.0), snaps, int(stride))
    except ValueError as exc:
        raise ConfigSchema(f"[params]: {exc}") from None
    side = p.get("side", "left")
    if side not in ("left", "right"):
        raise ConfigSchema("params.side must be 'left' or 'right'")

    init_consts = dict(constants, v_b=v_b)
    u0 = _expr(raw, "initial", "u0", ("x",), init_consts)
    v0 = _expr(raw, "initial", "v0", ("x",), init_consts) if "v0" in raw["initial"] else compile_source("v_b", (), init_consts)

    a = raw.get("analysis", {})
    th_kw = {}
    for f in fields(Thresholds):
        if f.name in a:
            val = _scalar(raw, "analysis", f.name, constants)
            th_kw[f.name] = int(val) if isinstance(f.default, int) and not isinstance(f.default, bool) else val
    thresholds = Thresholds(**th_kw)
    v_profile = _expr(raw, "analysis", "v_profile", ("x",), init_consts) if "v_profile" in a else None

    sweep = None
    if "sweep" in raw:
        path = raw["sweep"]["parameter"].strip()
        if path.count(".") != 1 or path.split(".")[0] not in SCHEMA:
            raise ConfigSchema(f"sweep.parameter {path!r} must be section.key")
        vals = [v.strip() for v in raw["sweep"]["values"].split(",") if v.strip()]
        if not vals:
            raise ConfigSchema("sweep.values is empty")
        for v in vals:
            try:
                num = constant_value(v, constants)
            except ExprError as exc:
                raise FieldError("sweep.values", exc) from None
            if not math.isfinite(num):
                raise ConfigSchema(f"sweep value {v!r} is not finite")
        sweep = (path, tuple(vals))

    xs = grid.x
    samples = tuple(float(s) for s in np.unique(np.concatenate([[0.0], xs[:: max(1, xs.size // 8)]])))
    report = validate_model(model, x_samples=samples)
    if validate and not report.passed:
        raise AssumptionViolation(report)
    return Scenario(name, raw, model, constants, grid, params, side, u0, v0, thresholds, report, v_profile, sweep)


def load_scenario(path, overrides=None, validate: bool = True) -> Scenario:
    p = resolve_path(path)
    raw = parse_text(p.read_text(), str(p))
    return build_scenario(raw, p.stem, overrides, validate)


# ------------------------------------------------------------------ output

def write_snapshots(run: RunRecord, path) -> None:
    x = run.grid.x
    xs = "[" + ",".join(_num(a) for a in x) + "]"
    with open(path, "w") as fh:
        for s in run.snapshots:
            fh.write('{"t": %s, "x": %s, "u": [%s], "v": [%s]}\n' % (
                _num(s.t), xs, ",".join(_num(a) for a in s.u), ",".join(_num(a) for a in s.v)))


def read_snapshots(path) -> list:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out.append(State(float(rec["t"]), np.array(rec["u"], dtype=float), np.array(rec["v"], dtype=float)))
    return out


def write_series(run: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        cols = [run.series[k] for k in SERIES_COLUMNS]
        for row in zip(*cols):
            w.writerow([_num(v) for v in row])


def read_series(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) if r[k] != "" else math.nan for r in rows]) for k in SERIES_COLUMNS}


def summary_row(cls: Optional[Classification], speed: Optional[SpeedEstimate] = None) -> dict:
    row = dict.fromkeys(SUMMARY_COLUMNS, "")
    if cls is not None:
        row.update(verdict=cls.verdict, sup_u_end=_num(cls.sup_u_end), u_center_end=_num(cls.u_center_end),
                   v_center_end=_num(cls.v_center_end), v_inf_estimate=_num(cls.v_inf_estimate),
                   v_inf_converged=_num(cls.v_inf_converged), oscillation_count=str(cls.oscillation_count),
                   oscillatory=_num(cls.oscillatory), notes="; ".join(cls.notes))
        if len(cls.front_speeds) == 2:
            row["front_speed_outer"], row["front_speed_inner"] = (_num(c) for c in cls.front_speeds)
    if speed is not None:
        row["c"] = _num(speed.c)
        if speed.bracket:
            row["c_b"], row["c_1"] = _num(speed.bracket[0]), _num(speed.bracket[1])
    return row


def write_run(run: RunRecord, out_dir, classification: Optional[Classification] = None,
              speed: Optional[SpeedEstimate] = None, scenario: Optional[Scenario] = None,
              svg: bool = False) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "snapshots.ndjson", out / "series.csv", out / "summary.csv", out / "run.json"]
    write_snapshots(run, written[0])
    write_series(run, written[1])
    with open(written[2], "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS)
        w.writeheader()
        w.writerow(summary_row(classification, speed))
    meta = {"half_width": run.grid.half_width, "dx": run.grid.dx, "dt": run.params.dt,
            "t_end": run.params.t_end, "snapshot_times": list(run.params.snapshot_times),
            "series_stride": run.params.series_stride, "side": run.side, "fingerprint": run.fingerprint}
    written[3].write_text(json.dumps(meta, indent=1) + "\n")
    if scenario is not None:
        (out / "scenario.scn").write_text(scenario.to_text())
        written.append(out / "scenario.scn")
    if svg:
        for s in run.snapshots:
            p = out / f"snapshot_{s.t:g}.svg"
            p.write_text(snapshot_svg(run.grid.x, s))
            written.append(p)
    return written


def read_run(run_dir) -> RunRecord:
    d = Path(run_dir)
    meta = json.loads((d / "run.json").read_text())
    grid = GridSpec(meta["half_width"], meta["dx"])
    params = SimParams(meta["dt"], meta["t_end"], tuple(meta["snapshot_times"]), meta["series_stride"])
    return RunRecord(read_snapshots(d / "snapshots.ndjson"), read_series(d / "series.csv"),
                     grid, params, meta.get("fingerprint", ""), meta["side"])


def snapshot_svg(x: np.ndarray, s: State, width: int = 640, height: int = 320) -> str:
    """u as a solid line, v dashed, both on a [0, max(1, sup u)] vertical scale."""
    top = max(1.0, float(s.u.max()), float(s.v.max()))
    pad = 30

    def pts(y):
        px = pad + (x - x[0]) / (x[-1] - x[0]) * (width - 2 * pad)
        py = height - pad - y / top * (height - 2 * pad)
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))

    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
            f'<rect width="100%" height="100%" fill="white"/>\n'
            f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
            f'<polyline fill="none" stroke="#1f4fb4" stroke-width="1.5" points="{pts(s.u)}"/>\n'
            f'<polyline fill="none" stroke="#8b5a2b" stroke-width="1.5" stroke-dasharray="6,4" points="{pts(s.v)}"/>\n'
            f'<text x="{pad}" y="{pad - 10}" font-size="12">t = {s.t:g}</text>\n'
            f'</svg>\n')


def write_sweep(rows: list, path) -> None:
    if not rows:
        raise ValueError("sweep table is empty")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (_num(r.get(k)) if not isinstance(r.get(k), str) else r.get(k)) for k in SWEEP_COLUMNS})


def read_sweep(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
