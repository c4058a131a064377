"""Observables extracted from runs: fronts, speeds, final tension, regime verdicts, lambda_b."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import BracketError, FrontTooClose, NoFront, NoPositiveRoot, NotConverged, SubcriticalTension
from .model import ModelSpec, u_star, wave_speeds
from .pde import FRONT_GUARD_NODES, FRONT_MIN_SUP, GridSpec, RunRecord, front_position

T1_DEFAULT = 99.0
T2_DEFAULT = 399.0

VERDICTS = ("Calm", "Riot", "LastingUpheaval", "Terrace", "Oscillatory", "Undetermined")


def half_max_position(u: np.ndarray, grid: GridSpec, fraction: float = 0.5, side: str = "left") -> Optional[float]:
    return front_position(u, grid.x, fraction, side)


def speed_times(t_end: float) -> tuple[float, float, float]:
    """Sampling times and relative tolerance for a run ending at ``t_end``.

    Full-length runs use (99, 399) at 5%; shorter ones scale both times by
    t_end/400 and use 8% once t2 drops below 200.
    """
    if t_end >= T2_DEFAULT + 1.0:
        return T1_DEFAULT, T2_DEFAULT, 0.05
    s = t_end / 400.0
    t1, t2 = T1_DEFAULT * s, T2_DEFAULT * s
    return t1, t2, (0.08 if t2 < 200.0 else 0.05)


# ---------------------------------------------------------------- speed

@dataclass(frozen=True)
class SpeedEstimate:
    c: float
    t1: float
    t2: float
    x1: float  # outward distance of the tracked front from x = 0
    x2: float
    side: str
    bracket: Optional[tuple] = None  # (c_b, c_1) when v_b > v_star

    def within(self, rel: float = 0.05) -> Optional[bool]:
        """Is c inside [c_b (1 - rel), c_1 (1 + rel)]?"""
        if self.bracket is None:
            return None
        c_b, c_1 = self.bracket
        return c_b * (1 - rel) <= self.c <= c_1 * (1 + rel)


def _outward(pos: float, side: str) -> float:
    return -pos if side == "left" else pos


def _snapshot(run: RunRecord, t: float):
    s = run.snapshot_at(t)
    if abs(s.t - t) > max(run.params.dt, 0.5 * run.params.series_stride * run.params.dt) + 1e-9:
        raise LookupError(f"no snapshot near t = {t:g} (nearest is {s.t:g}); request it via snapshot_times")
    return s


def _tracked_front(run: RunRecord, s, fraction: float = 0.5) -> float:
    pos = front_position(s.u, run.grid.x, fraction, run.side)
    if pos is None:
        raise NoFront(f"no front at t = {s.t:g} (sup u = {s.u.max():.3g})")
    edge = run.grid.x[0] if run.side == "left" else run.grid.x[-1]
    if abs(pos - edge) < FRONT_GUARD_NODES * run.grid.dx:
        raise FrontTooClose(f"front at x = {pos:g} within {FRONT_GUARD_NODES} nodes of the boundary")
    return pos


def bracket_for(model: ModelSpec) -> Optional[tuple]:
    try:
        return wave_speeds(model)
    except (SubcriticalTension, BracketError):
        return None


def estimate_speed(run: RunRecord, t1: float = T1_DEFAULT, t2: float = T2_DEFAULT,
                   model: ModelSpec | None = None) -> SpeedEstimate:
    """Two-time half-supremum speed of the tracked front.

    Positions are stored as outward distances, so spreading gives c > 0 on
    either side.
    """
    if not t2 > t1:
        raise ValueError("need t2 > t1")
    s1, s2 = _snapshot(run, t1), _snapshot(run, t2)
    x1 = _outward(_tracked_front(run, s1), run.side)
    x2 = _outward(_tracked_front(run, s2), run.side)
    c = (x2 - x1) / (t2 - t1)
    return SpeedEstimate(c, t1, t2, x1, x2, run.side, bracket_for(model) if model is not None else None)


# -------------------------------------------------------------- final tension

def final_tension(run: RunRecord, window: float = 10.0, tol: float = 1e-4) -> float:
    """Trailing-window mean of v at x = 0; NotConverged while it still drifts."""
    t = run.series["t"]
    vc = run.series["v_center"]
    t_end = t[-1]
    if t_end - t[0] < window:
        raise NotConverged(f"run of length {t_end - t[0]:g} is shorter than the window {window:g}")
    j = int(np.argmin(np.abs(t - (t_end - window))))
    drift = abs(vc[-1] - vc[j])
    if not drift < tol:
        raise NotConverged(f"v(0) moved by {drift:.3g} over the last {window:g} time units")
    return float(np.mean(vc[j:]))


# ------------------------------------------------------------- classification

@dataclass(frozen=True)
class Thresholds:
    eps_calm: float = 1e-3
    eps_level: float = 2e-2
    window: float = 10.0
    t1: Optional[float] = None  # None: derived from t_end by speed_times
    t2: Optional[float] = None
    plateau_slope: float = 1e-4
    plateau_nodes: int = 10
    plateau_gap: float = 5e-2
    terrace_ratio: float = 0.2
    osc_amplitude: float = 1e-3
    osc_changes: int = 3

    def times(self, t_end: float) -> tuple[float, float]:
        d1, d2, _ = speed_times(t_end)
        return (d1 if self.t1 is None else self.t1), (d2 if self.t2 is None else self.t2)


@dataclass
class Classification:
    verdict: str
    sup_u_end: float
    u_center_end: float
    v_center_end: float
    v_inf_estimate: float
    v_inf_converged: bool
    front_speeds: tuple = ()
    oscillation_count: int = 0
    oscillatory: bool = False
    notes: list = field(default_factory=list)

    def evidence(self) -> dict:
        d = asdict(self)
        d["front_speeds"] = list(self.front_speeds)
        d["notes"] = "; ".join(self.notes)
        return d


def _half_line(u: np.ndarray, grid: GridSpec, side: str):
    """Profile from x = 0 outward, with outward distances."""
    c = grid.center
    if side == "left":
        return u[c::-1], -grid.x[c::-1]
    return u[c:], grid.x[c:]


def _first_below(w: np.ndarray, s: np.ndarray, level: float, start: int = 0) -> Optional[float]:
    idx = np.flatnonzero(w[start:] < level)
    if idx.size == 0:
        return None
    i = start + int(idx[0])
    if i == 0:
        return float(s[0])
    a, b = w[i - 1], w[i]
    return float(s[i - 1] + (a - level) / (a - b) * (s[i] - s[i - 1]))


def plateaus(w: np.ndarray, slope: float = 1e-4, min_nodes: int = 10, stop: int | None = None) -> list:
    """Maximal flat runs (|step| < slope) of at least ``min_nodes`` nodes: (start, end, mean)."""
    w = w if stop is None else w[:stop]
    flat = np.abs(np.diff(w)) < slope
    out, i, n = [], 0, flat.size
    while i < n:
        if not flat[i]:
            i += 1
            continue
        j = i
        while j < n and flat[j]:
            j += 1
        if j - i + 1 >= min_nodes:
            out.append((i, j, float(np.mean(w[i:j + 1]))))
        i = j
    return out


def distinct_levels(values, gap: float) -> list:
    levels = []
    for v in values:
        if all(abs(v - l) >= gap for l in levels):
            levels.append(v)
    return levels


def terrace_positions(u: np.ndarray, grid: GridSpec, side: str, th: Thresholds,
                      need_plateaus: bool = True) -> Optional[tuple]:
    """Outward positions (x_in, x_out) of the inner and outer tracked levels, or None.

    Inner level: half of u(0), first crossing outward.  Outer level: half of the
    maximum beyond the inner front, outermost crossing.  Requires two plateau
    values behind the leading front at least ``plateau_gap`` apart unless
    ``need_plateaus`` is False.
    """
    w, s = _half_line(u, grid, side)
    sup = float(w.max())
    if sup < th.eps_calm:
        return None
    # everything up to the outermost non-negligible activity is "behind the front"
    stop = int(np.flatnonzero(w >= th.eps_calm)[-1]) + 1
    flats = plateaus(w, th.plateau_slope * grid.dx, th.plateau_nodes, stop)
    if need_plateaus and len(distinct_levels([p[2] for p in flats], th.plateau_gap)) < 2:
        return None
    h = float(w[0])
    if h < th.eps_calm:
        return None
    x_in = _first_below(w, s, 0.5 * h)
    if x_in is None:
        return None
    i_in = int(np.searchsorted(s, x_in)) + th.plateau_nodes
    if i_in >= w.size:
        return None
    m = float(w[i_in:].max())
    if m < th.eps_calm:
        return None
    above = np.flatnonzero(w[i_in:] >= 0.5 * m)
    k = i_in + int(above[-1])
    if k + 1 >= w.size:
        return None
    a, b = w[k], w[k + 1]
    x_out = float(s[k] + (a - 0.5 * m) / (a - b) * (s[k + 1] - s[k]))
    return x_in, x_out


def oscillation_count(u: np.ndarray, grid: GridSpec, side: str, amplitude: float = 1e-3) -> int:
    """Slope sign changes behind the front, ignoring wiggles below ``amplitude``."""
    w, _ = _half_line(u, grid, side)
    sup = float(w.max())
    if sup < FRONT_MIN_SUP:
        return 0
    w = w[:int(np.flatnonzero(w >= 0.5 * sup)[-1]) + 1]
    changes, direction, ref = 0, 0, float(w[0])
    for val in w[1:]:
        if direction == 0:
            if abs(val - ref) > amplitude:
                direction, ref = (1 if val > ref else -1), val
        elif direction * (val - ref) > 0:
            ref = val
        elif abs(val - ref) > amplitude:
            changes += 1
            direction, ref = -direction, val
    return changes


def classify(run: RunRecord, model: ModelSpec, th: Thresholds | None = None) -> Classification:
    """Regime verdict with its evidence.

    Order: Calm, Terrace, LastingUpheaval, Riot, Oscillatory, Undetermined.
    Terrace is tested before LastingUpheaval because a terrace has an upheaval
    core at x = 0 and would otherwise be reported as a plain upheaval.
    """
    th = th or Thresholds()
    final = run.final
    grid = run.grid
    sup_end = float(final.u.max())
    uc, vc = float(final.u[grid.center]), float(final.v[grid.center])
    notes = []
    try:
        v_inf, conv = final_tension(run, th.window), True
    except NotConverged as exc:
        v_inf, conv = vc, False
        notes.append(f"v_inf from last sample ({exc})")

    def out(verdict, speeds=(), count=0, osc=False):
        return Classification(verdict, sup_end, uc, vc, v_inf, conv, tuple(speeds), count, osc, notes)

    if sup_end < th.eps_calm:
        return out("Calm")

    count = oscillation_count(final.u, grid, run.side, th.osc_amplitude)
    osc = count >= th.osc_changes

    speeds = _terrace_speeds(run, th, notes)
    if speeds is not None:
        c_in, c_out = speeds
        if abs(c_out - c_in) > th.terrace_ratio * max(abs(c_in), abs(c_out)):
            return out("Terrace", (c_out, c_in), count, osc)

    try:
        u1 = u_star(model, 1.0)
    except NoPositiveRoot:
        u1 = None
    if u1 is not None and abs(uc - u1) < th.eps_level:
        return out("LastingUpheaval", (), count, osc)

    front = front_position(final.u, grid.x, 0.5, run.side)
    if front is not None and uc < th.eps_calm and v_inf < model.v_b:
        return out("Riot", (), count, osc)
    if osc:
        return out("Oscillatory", (), count, osc)
    return out("Undetermined", (), count, osc)


def _terrace_speeds(run: RunRecord, th: Thresholds, notes: list) -> Optional[tuple]:
    t1, t2 = th.times(run.params.t_end)
    try:
        s1, s2 = _snapshot(run, t1), _snapshot(run, t2)
    except LookupError:
        notes.append(f"terrace test skipped: no snapshots at t = {t1:g}, {t2:g}")
        return None
    # the plateau structure is required at the later time only; early on the
    # upheaval core is still too narrow to be flat
    p2 = terrace_positions(s2.u, run.grid, run.side, th)
    p1 = terrace_positions(s1.u, run.grid, run.side, th, need_plateaus=False) if p2 else None
    if p1 is None or p2 is None:
        return None
    dt = s2.t - s1.t
    return (p2[0] - p1[0]) / dt, (p2[1] - p1[1]) / dt


# ------------------------------------------------------------- wave residual

def wave_residual(run: RunRecord, t_a: float, t_b: float) -> float:
    """Max difference between the t_a profile and the t_b profile shifted back onto it."""
    sa, sb = _snapshot(run, t_a), _snapshot(run, t_b)
    x = run.grid.x
    pa = front_position(sa.u, x, 0.5, run.side)
    pb = front_position(sb.u, x, 0.5, run.side)
    if pa is None or pb is None:
        raise NoFront("a front is needed at both times")
    shift = pb - pa
    c = run.grid.center
    half = slice(0, c + 1) if run.side == "left" else slice(c, None)
    xh = x[half]
    lo, hi = xh[0], xh[-1]
    keep = (xh + shift >= lo) & (xh + shift <= hi)
    if not keep.any():
        raise NoFront("no overlap after alignment")
    moved = np.interp(xh[keep] + shift, xh, sb.u[half])
    return float(np.max(np.abs(moved - sa.u[half][keep])))


# ---------------------------------------------------------- principal eigenvalue

@dataclass(frozen=True)
class EigenResult:
    lambda_b: float
    eigenvector: np.ndarray
    iterations: int
    residual: float


def linearized_operator(model: ModelSpec, v_profile: np.ndarray, grid: GridSpec):
    """Diagonal, off-diagonal and potential of A = -d1 D2 - (r(v) f(0) mask - omega).

    The Neumann rows carry 2 * (-d1/dx^2) on their single neighbour.
    """
    v_profile = np.asarray(v_profile, dtype=float)
    x = grid.x
    if v_profile.shape != x.shape:
        raise ValueError("v_b profile must have one value per grid node")
    if np.any((v_profile <= 0) | (v_profile >= 1)):
        raise ValueError("v_b profile must lie in (0,1)")
    potential = -(np.asarray(model.r.eval_on(x.shape, v=v_profile)) * model.f0 * model.mask_on(x) - model.omega)
    k = model.d1 / grid.dx ** 2
    diag = 2.0 * k + potential
    return diag, k, potential


def principal_eigenvalue(model: ModelSpec, v_profile: np.ndarray, grid: GridSpec,
                         tol: float = 1e-8, max_iter: int = 100_000) -> EigenResult:
    """Lowest eigenvalue of the Neumann linearization by shifted inverse iteration."""
    diag, k, potential = linearized_operator(model, v_profile, grid)
    n = diag.size
    # W A is symmetric for W = diag(1/2, 1, ..., 1, 1/2); iterate on W^1/2 A W^-1/2
    sw = np.ones(n)
    sw[0] = sw[-1] = math.sqrt(0.5)
    off = np.full(n - 1, -k)
    off[0] = off[-1] = -k * math.sqrt(2.0)
    sigma = float(potential.min()) - 1.0
    banded = np.zeros((2, n))
    banded[0, 1:] = off
    banded[1] = diag - sigma
    chol = cholesky_banded(banded)

    def apply_a(phi):
        # original (unsymmetrized) operator
        out = diag * phi
        out[1:-1] -= k * (phi[:-2] + phi[2:])
        out[0] -= 2.0 * k * phi[1]
        out[-1] -= 2.0 * k * phi[-2]
        return out

    def apply_s(psi):
        out = diag * psi
        out[:-1] += off * psi[1:]
        out[1:] += off * psi[:-1]
        return out

    psi = np.ones(n) * sw
    psi /= np.linalg.norm(psi)
    lam, res = math.nan, math.inf
    for it in range(1, max_iter + 1):
        psi = cho_solve_banded((chol, False), psi)
        psi /= np.linalg.norm(psi)
        lam = float(psi @ apply_s(psi))
        phi = psi / sw
        phi = phi / phi[np.argmax(np.abs(phi))]
        res = float(np.max(np.abs(apply_a(phi) - lam * phi)))
        if res <= tol:
            if np.any(phi <= 0):
                raise NotConverged("principal eigenvector is not positive")
            return EigenResult(lam, phi, it, res)
    raise NotConverged(f"inverse iteration: residual {res:.3g} after {max_iter} iterations")
