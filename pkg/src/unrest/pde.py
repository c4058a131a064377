"""Explicit Euler finite differences on a truncated 1-D domain with Neumann ends."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    BlowUp,
    CFLViolation,
    FrontTooClose,
    Interrupted,
    InvalidInitialData,
    PositivityViolation,
)
from .expr import CompiledExpr
from .model import ModelSpec

BOUND_TOL = 1e-9
FRONT_GUARD_NODES = 20
FRONT_MIN_SUP = 1e-6


@dataclass(frozen=True)
class GridSpec:
    half_width: float = 400.0
    dx: float = 1.0
    bc: str = "neumann"

    def __post_init__(self):
        if self.dx <= 0:
            raise ValueError("dx must be positive")
        if self.bc != "neumann":
            raise ValueError(f"unsupported boundary condition {self.bc!r}")
        cells = 2.0 * self.half_width / self.dx
        if abs(cells - round(cells)) > 1e-9 or round(cells) + 1 < 3:
            raise ValueError("2*half_width/dx must be an integer and give at least 3 nodes")

    @property
    def n(self) -> int:
        return int(round(2.0 * self.half_width / self.dx)) + 1

    @property
    def x(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    @property
    def center(self) -> int:
        return self.n // 2


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.05
    t_end: float = 400.0
    snapshot_times: tuple = ()
    series_stride: int = 20

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.series_stride < 1:
            raise ValueError("series_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class State:
    t: float
    u: np.ndarray
    v: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.v.copy())


@dataclass
class RunRecord:
    snapshots: list
    series: dict
    grid: GridSpec
    params: SimParams
    fingerprint: str = ""
    side: str = "left"

    def snapshot_at(self, t: float) -> State:
        """The recorded snapshot nearest to ``t``."""
        if not self.snapshots:
            raise LookupError("run has no snapshots")
        return min(self.snapshots, key=lambda s: abs(s.t - t))

    @property
    def final(self) -> State:
        return self.snapshots[-1]


def check_cfl(model: ModelSpec, grid: GridSpec, dt: float) -> None:
    number = dt * 2.0 * max(model.d1, model.d2) / grid.dx ** 2
    if number > 1.0 - 1e-9:
        raise CFLViolation(f"dt*2*max(d1,d2)/dx^2 = {number:.6g} exceeds 1")


def initial_state(grid: GridSpec, u0: CompiledExpr, v0: CompiledExpr) -> State:
    x = grid.x
    u = np.array(u0.eval_on(x.shape, x=x), dtype=float)
    v = np.array(v0.eval_on(x.shape, x=x), dtype=float)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise InvalidInitialData("initial data must be finite")
    if np.any(u < 0):
        i = int(np.flatnonzero(u < 0)[0])
        raise InvalidInitialData(f"u0 is negative at x = {x[i]:g}")
    if np.any((v <= 0) | (v >= 1)):
        i = int(np.flatnonzero((v <= 0) | (v >= 1))[0])
        raise InvalidInitialData(f"v0 = {v[i]:g} at x = {x[i]:g} is outside (0,1)")
    if not np.any(u > 0):
        warnings.warn("u0 vanishes identically: (0, v0) is stationary", stacklevel=2)
    return State(0.0, u, v)


def _laplacian(w: np.ndarray, dx: float) -> np.ndarray:
    out = np.empty_like(w)
    out[1:-1] = w[2:] - 2.0 * w[1:-1] + w[:-2]
    # ghost reflection w[-1] = w[1], w[N] = w[N-2]
    out[0] = 2.0 * (w[1] - w[0])
    out[-1] = 2.0 * (w[-2] - w[-1])
    return out / (dx * dx)


def _enforce_bounds(u: np.ndarray, v: np.ndarray, t: float) -> None:
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise BlowUp(f"non-finite value at t = {t:.6g}")
    umin = u.min()
    if umin < 0:
        if umin < -BOUND_TOL:
            raise PositivityViolation(f"u = {umin:.3g} < 0 at t = {t:.6g}")
        np.maximum(u, 0.0, out=u)
    vmin, vmax = v.min(), v.max()
    if vmin < 0 or vmax > 1:
        if vmin < -BOUND_TOL or vmax > 1 + BOUND_TOL:
            raise PositivityViolation(f"v outside [0,1] ({vmin:.3g}, {vmax:.3g}) at t = {t:.6g}")
        np.clip(v, 0.0, 1.0, out=v)


def step(state: State, model: ModelSpec, grid: GridSpec, dt: float,
         mask: np.ndarray | None = None) -> State:
    """One explicit Euler step; reads only ``state`` and returns a fresh State."""
    x = grid.x
    if mask is None:
        mask = model.mask_on(x)
    u, v = state.u, state.v
    du = model.d1 * _laplacian(u, grid.dx) + u * (model.r.eval(v=v) * model.f.eval(u=u) * mask - model.omega)
    dv = model.d2 * _laplacian(v, grid.dx) + model.psi.eval(u=u, v=v, x=x)
    u_new = u + dt * du
    v_new = v + dt * dv
    t_new = state.t + dt
    _enforce_bounds(u_new, v_new, t_new)
    return State(t_new, u_new, v_new)


def front_position(u: np.ndarray, x: np.ndarray, fraction: float = 0.5, side: str = "left") -> Optional[float]:
    """Outermost point on ``side`` where u reaches ``fraction`` of its supremum.

    Linear interpolation between the two bracketing nodes; None when sup u is
    below 1e-6.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0,1)")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    sup = float(np.max(u))
    if not sup >= FRONT_MIN_SUP:
        return None
    level = fraction * sup
    if side == "right":
        pos = front_position(u[::-1], -x[::-1], fraction, "left")
        return None if pos is None else -pos
    i = int(np.argmax(u >= level))
    if i == 0:
        return float(x[0])
    u0, u1 = u[i - 1], u[i]
    return float(x[i - 1] + (level - u0) / (u1 - u0) * (x[i] - x[i - 1]))


def simulate(model: ModelSpec, state0: State, grid: GridSpec, params: SimParams,
             side: str = "left", observer: Callable[[State], bool] | None = None) -> RunRecord:
    """Iterate ``step`` to ``params.t_end``.

    Snapshots are taken at the steps nearest the requested times (plus the last
    step); scalar series every ``series_stride`` steps.  ``observer`` is called
    at each series sample and may return True to stop the run early.
    """
    check_cfl(model, grid, params.dt)
    dt, n_steps = params.dt, params.n_steps
    x = grid.x
    mask = model.mask_on(x)
    c = grid.center
    guard = FRONT_GUARD_NODES * grid.dx
    edge = x[0] if side == "left" else x[-1]

    snap_steps = {min(max(int(round(t / dt)), 0), n_steps) for t in params.snapshot_times}
    snap_steps.add(n_steps)

    series = {k: [] for k in ("t", "sup_u", "u_center", "v_center", "front_x")}
    snapshots = []

    def record(s: State):
        front = front_position(s.u, x, 0.5, side)
        series["t"].append(s.t)
        series["sup_u"].append(float(s.u.max()))
        series["u_center"].append(float(s.u[c]))
        series["v_center"].append(float(s.v[c]))
        series["front_x"].append(math.nan if front is None else front)
        return front

    def finish():
        return RunRecord(snapshots, {k: np.array(vals, dtype=float) for k, vals in series.items()},
                         grid, params, model.fingerprint(), side)

    state = state0.copy()
    front0 = record(state)
    started_inside = front0 is not None and abs(front0 - edge) < guard
    if 0 in snap_steps:
        snapshots.append(state.copy())

    for k in range(1, n_steps + 1):
        state = step(state, model, grid, dt, mask)
        state.t = k * dt  # avoid drift from repeated addition
        if k in snap_steps:
            snapshots.append(state.copy())
        if k % params.series_stride == 0 or k == n_steps:
            front = record(state)
            if front is not None and not started_inside and abs(front - edge) < guard:
                raise FrontTooClose(f"front at x = {front:.6g} within {guard:g} of the boundary at t = {state.t:.6g}")
            if observer is not None and observer(state):
                if not snapshots or snapshots[-1].t != state.t:
                    snapshots.append(state.copy())
                raise Interrupted(finish())
    return finish()
