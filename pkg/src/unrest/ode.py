"""Space-homogeneous system: diffusion dropped, integrated with classic RK4."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, NotConverged
from .model import ModelSpec

REST_TOL = 1e-8
T_CAP = 1e6


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_end: float
    v_end: float
    max_u: float
    t_at_max_u: float
    rate_end: float  # |du/dt| + |dv/dt| at the last step

    @property
    def samples(self):
        return [{"t": float(a), "u": float(b), "v": float(c)} for a, b, c in zip(self.t, self.u, self.v)]


def _rhs(model: ModelSpec, mask0: float):
    def rhs(u, v):
        return model.growth(u, v, mask0), model.psi.eval(u=u, v=v, x=0.0)
    return rhs


def simulate_homogeneous(model: ModelSpec, u0: float, v0: float, dt: float, t_end: float,
                         stride: int = 1) -> Trajectory:
    """RK4 with fixed ``dt``; samples every ``stride`` steps plus the last one.

    Space-dependent terms (mask, psi) are evaluated at x = 0.
    """
    if u0 < 0:
        raise ValueError("u0 must be nonnegative")
    if not 0.0 < v0 < 1.0:
        raise ValueError("v0 must lie in (0,1)")
    if not dt > 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    mask0 = float(model.mask_on(np.zeros(1))[0])
    f = _rhs(model, mask0)
    n = int(round(t_end / dt))
    ts, us, vs = [0.0], [float(u0)], [float(v0)]
    u, v = float(u0), float(v0)
    max_u, t_max = u, 0.0
    for k in range(1, n + 1):
        a1, b1 = f(u, v)
        a2, b2 = f(u + 0.5 * dt * a1, v + 0.5 * dt * b1)
        a3, b3 = f(u + 0.5 * dt * a2, v + 0.5 * dt * b2)
        a4, b4 = f(u + dt * a3, v + dt * b3)
        u += dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        v += dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        if not (math.isfinite(u) and math.isfinite(v)):
            raise BlowUp(f"non-finite state at t = {k * dt:.6g}")
        if u > max_u:
            max_u, t_max = u, k * dt
        if k % stride == 0 or k == n:
            ts.append(k * dt)
            us.append(u)
            vs.append(v)
    du, dv = f(u, v)
    return Trajectory(np.array(ts), np.array(us), np.array(vs), u, v, max_u, t_max, abs(du) + abs(dv))


def phase_metrics(traj: Trajectory, tol: float = REST_TOL) -> dict:
    if not traj.rate_end < tol:
        raise NotConverged(f"|du/dt| + |dv/dt| = {traj.rate_end:.3g} at t = {traj.t[-1]:g}")
    return {"v_inf": traj.v_end, "max_u": traj.max_u}


def integrate_to_rest(model: ModelSpec, u0: float, v0: float, dt: float = 0.01, t_end: float = 100.0,
                      stride: int = 10, cap: float = T_CAP) -> tuple[Trajectory, dict]:
    """Run, doubling ``t_end`` until quasi-stationary; NotConverged past ``cap``."""
    while True:
        traj = simulate_homogeneous(model, u0, v0, dt, t_end, stride)
        try:
            return traj, phase_metrics(traj)
        except NotConverged:
            if 2 * t_end > cap:
                raise
            t_end *= 2
