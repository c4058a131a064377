"""System definition, sampled assumption checks, and the derived scalars.

The system is

    u_t - d1 u_xx = u [ r(v) f(u) mask(x) - omega ]
    v_t - d2 v_xx = psi(u, v, x)

with the growth term always built from ``r``, ``f`` and ``mask`` so that it
vanishes at ``u = 0``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .errors import (
    BracketError,
    ModelError,
    NoPositiveRoot,
    PreconditionViolated,
    SubcriticalTension,
)
from .expr import CompiledExpr, compile_source

MONOTONE_TOL = 1e-12
ROOT_TOL = 1e-10
M_CAP = 1e6


@dataclass(frozen=True)
class ModelSpec:
    d1: float
    d2: float
    omega: float
    r: CompiledExpr  # over {v}
    f: CompiledExpr  # over {u}
    psi: CompiledExpr  # over {u, v, x}
    v_b: float
    mask: Optional[CompiledExpr] = None  # over {x}; None means 1
    g: Optional[CompiledExpr] = None  # over {v}; psi = u*g(v) factor when known

    @classmethod
    def from_strings(cls, *, d1, d2, omega, r, f, psi, v_b, mask=None, g=None,
                     constants: Mapping[str, float] | None = None) -> "ModelSpec":
        c = dict(constants or {})
        return cls(
            d1=float(d1), d2=float(d2), omega=float(omega),
            r=compile_source(r, ("v",), c),
            f=compile_source(f, ("u",), c),
            psi=compile_source(psi, ("u", "v", "x"), c),
            v_b=float(v_b),
            mask=None if mask is None else compile_source(mask, ("x",), c),
            g=None if g is None else compile_source(g, ("v",), c),
        )

    # scalar helpers ---------------------------------------------------------

    def r_of(self, v):
        return self.r.eval(v=v)

    def f_of(self, u):
        return self.f.eval(u=u)

    def psi_of(self, u, v, x=0.0):
        return self.psi.eval(u=u, v=v, x=x)

    def mask_on(self, x: np.ndarray) -> np.ndarray:
        if self.mask is None:
            return np.ones_like(x, dtype=float)
        return np.array(self.mask.eval_on(np.shape(x), x=x), dtype=float)

    def growth(self, u, v, mask=1.0):
        """The activity reaction term u [r(v) f(u) mask - omega]."""
        return u * (self.r.eval(v=v) * self.f.eval(u=u) * mask - self.omega)

    @property
    def f0(self) -> float:
        return self.f.eval(u=0.0)

    def fingerprint(self) -> str:
        parts = [repr(self.d1), repr(self.d2), repr(self.omega), repr(self.v_b),
                 self.r.source, self.f.source, self.psi.source,
                 self.mask.source if self.mask else "1"]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]

    def describe(self) -> str:
        mask = f" * [{self.mask.source}]" if self.mask else ""
        return (f"u_t - {self.d1:g} u_xx = u*[({self.r.source})*({self.f.source}){mask} - {self.omega:g}]; "
                f"v_t - {self.d2:g} v_xx = {self.psi.source}; v_b = {self.v_b:g}")


# ---------------------------------------------------------------- assumptions

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    witness: Optional[dict] = None
    note: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple
    tension_inhibiting: bool
    tension_enhancing: Optional[bool]  # None: no saturation level M found under the cap
    saturation_M: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            line = f"  [{status}] {c.name}"
            if c.note:
                line += f" -- {c.note}"
            if not c.passed and c.witness:
                line += " at " + ", ".join(f"{k}={v:.6g}" for k, v in c.witness.items())
            out.append(line)
        enh = "unknown" if self.tension_enhancing is None else str(self.tension_enhancing).lower()
        out.append(f"  tension_inhibiting = {str(self.tension_inhibiting).lower()}")
        out.append(f"  tension_enhancing  = {enh}"
                   + (f" (M = {self.saturation_M:g})" if self.saturation_M is not None else ""))
        return out


def _first(mask: np.ndarray):
    idx = np.flatnonzero(~mask)
    return None if idx.size == 0 else int(idx[0])


def find_saturation(spec: ModelSpec, cap: float = M_CAP) -> Optional[float]:
    """Smallest power of two M >= 1 with f(M) <= 0, or None beyond ``cap``."""
    m = 1.0
    while m <= cap:
        if spec.f_of(m) <= 0:
            return m
        m *= 2.0
    return None


def validate_model(spec: ModelSpec, n: int = 256, u_max: float | None = None,
                   x_samples=(0.0,)) -> AssumptionReport:
    """Check the standing assumptions on a sample lattice.

    ``u_max`` defaults to the saturation level M when f has one, else 1.
    """
    if n < 64:
        raise ValueError("sampling resolution must be at least 64 points per axis")
    checks = []
    M = find_saturation(spec)
    if u_max is None:
        u_max = M if M is not None else 1.0
    us = np.linspace(0.0, u_max, n)
    vs = np.linspace(0.0, 1.0, n)
    v_in = vs[1:-1]

    ok = spec.d1 > 0 and spec.d2 >= 0 and spec.omega > 0
    checks.append(Check("a) d1 > 0, d2 >= 0, omega > 0", ok,
                        None if ok else {"d1": spec.d1, "d2": spec.d2, "omega": spec.omega}))

    fv = np.asarray(spec.f.eval_on(us.shape, u=us))
    i = _first(np.diff(fv) <= MONOTONE_TOL)
    f0 = float(fv[0])
    if f0 <= 0:
        checks.append(Check("b) f nonincreasing, f(0) > 0", False, {"u": 0.0}))
    else:
        checks.append(Check("b) f nonincreasing, f(0) > 0", i is None,
                            None if i is None else {"u": float(us[i + 1])}))

    rv = np.asarray(spec.r.eval_on(vs.shape, v=vs))
    if not np.all(np.isfinite(rv)):
        j = _first(np.isfinite(rv))
        checks.append(Check("c) r nonnegative, increasing on [0,1]", False, {"v": float(vs[j])}))
    else:
        j = _first(rv >= -MONOTONE_TOL)
        k = _first(np.diff(rv) >= -MONOTONE_TOL)
        wit = None
        if j is not None:
            wit = {"v": float(vs[j])}
        elif k is not None:
            wit = {"v": float(vs[k + 1])}
        checks.append(Check("c) r nonnegative, increasing on [0,1]", wit is None, wit))

    if f0 > 0:
        level = spec.omega / f0
        ok = rv[0] < level < rv[-1]
        wit = None if ok else ({"v": 0.0} if rv[0] >= level else {"v": 1.0})
        checks.append(Check("d) r(0) < omega/f(0) < r(1)", ok, wit,
                            f"omega/f(0) = {level:.6g}, r(0) = {rv[0]:.6g}, r(1) = {rv[-1]:.6g}"))
    else:
        checks.append(Check("d) r(0) < omega/f(0) < r(1)", False, {"u": 0.0}))

    ok_vb = 0.0 < spec.v_b < 1.0
    checks.append(Check("v_b in (0,1)", ok_vb, None if ok_vb else {"v": spec.v_b}))

    wit = None
    for x in x_samples:
        p0 = np.asarray(spec.psi.eval_on(vs.shape, u=0.0, v=vs, x=x))
        below = (vs > 0) & (vs < spec.v_b)
        above = (vs > spec.v_b) & (vs < 1)
        bad = (below & (p0 < -MONOTONE_TOL)) | (above & (p0 > MONOTONE_TOL))
        if bad.any():
            wit = {"u": 0.0, "v": float(vs[np.flatnonzero(bad)[0]]), "x": float(x)}
            break
    checks.append(Check("e) v_b weakly stable zero of psi(0,.)", wit is None, wit))

    wit = None
    for x in x_samples:
        p_lo = np.asarray(spec.psi.eval_on(us.shape, u=us, v=0.0, x=x))
        p_hi = np.asarray(spec.psi.eval_on(us.shape, u=us, v=1.0, x=x))
        if (p_lo < -MONOTONE_TOL).any():
            wit = {"u": float(us[np.flatnonzero(p_lo < -MONOTONE_TOL)[0]]), "v": 0.0, "x": float(x)}
            break
        if (p_hi > MONOTONE_TOL).any():
            wit = {"u": float(us[np.flatnonzero(p_hi > MONOTONE_TOL)[0]]), "v": 1.0, "x": float(x)}
            break
    checks.append(Check("f) psi(u,0) >= 0 and psi(u,1) <= 0", wit is None, wit))

    # structural flags on interior samples
    U, V = np.meshgrid(us[1:], v_in, indexing="ij")
    inhibiting = all(
        bool(np.all(np.asarray(spec.psi.eval_on(U.shape, u=U, v=V, x=x)) < 0)) for x in x_samples
    )
    if M is None:
        enhancing = None
    else:
        um = np.linspace(0.0, M, n)
        fm = np.asarray(spec.f.eval_on(um.shape, u=um))
        strictly = bool(np.all(np.diff(fm) < 0))
        Ue, Ve = np.meshgrid(um[1:-1], v_in, indexing="ij")
        positive = all(
            bool(np.all(np.asarray(spec.psi.eval_on(Ue.shape, u=Ue, v=Ve, x=x)) > 0)) for x in x_samples
        )
        enhancing = strictly and positive
    return AssumptionReport(tuple(checks), inhibiting, enhancing, M)


# ------------------------------------------------------------------- scalars

def bisect(fn, lo: float, hi: float, tol: float = ROOT_TOL, max_iter: int = 400) -> float:
    """Root of ``fn`` in [lo, hi]; the endpoint values must differ in sign."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo:g}, {hi:g}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        fm = fn(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def v_star(spec: ModelSpec) -> float:
    """Threshold tension: the root of r(v) = omega / f(0) in (0, 1)."""
    level = spec.omega / spec.f0
    return bisect(lambda v: spec.r_of(v) - level, 0.0, 1.0)


def u_star(spec: ModelSpec, v: float) -> float:
    """Positive equilibrium activity at tension ``v``: f(u) = omega / r(v)."""
    rv = spec.r_of(v)
    if rv * spec.f0 <= spec.omega:
        raise NoPositiveRoot(f"r({v:g}) f(0) <= omega: no positive equilibrium")
    level = spec.omega / rv
    hi = 1.0
    while spec.f_of(hi) > level:
        hi *= 2.0
        if hi > M_CAP:
            raise NoPositiveRoot(f"f never reaches omega/r({v:g}) = {level:g} below u = {M_CAP:g}")
    return bisect(lambda u: spec.f_of(u) - level, 0.0, hi)


def linear_growth(spec: ModelSpec) -> float:
    """K_b, the growth rate of small activity at the quiet state (0, v_b)."""
    k = spec.r_of(spec.v_b) * spec.f0 - spec.omega
    try:
        vs = v_star(spec)
    except BracketError:
        return k
    if abs(k) > 1e-9 and abs(spec.v_b - vs) > 1e-9 and (k > 0) != (spec.v_b > vs):
        raise ModelError("sign of K_b disagrees with sign of v_b - v_star; is r monotone?")
    return k


def upper_speed(spec: ModelSpec) -> float:
    return 2.0 * math.sqrt(spec.d1 * max(spec.r_of(1.0) * spec.f0 - spec.omega, 0.0))


def wave_speeds(spec: ModelSpec) -> tuple[float, float]:
    """(c_b, c_1) = 2 sqrt(d1 (r(v) f(0) - omega)) at v = v_b and v = 1."""
    c_1 = upper_speed(spec)
    k_b = spec.r_of(spec.v_b) * spec.f0 - spec.omega
    if k_b <= 0:
        raise SubcriticalTension(f"v_b = {spec.v_b:g} is not above v_star", c_1=c_1)
    c_b = 2.0 * math.sqrt(spec.d1 * k_b)
    if not c_b < c_1:
        raise ModelError(f"expected c_b < c_1, got {c_b:g} >= {c_1:g}")
    return c_b, c_1


def gamma(c: float, c_b: float, c_1: float) -> float:
    return (math.sqrt(c * c - c_b * c_b) - math.sqrt(max(c * c - c_1 * c_1, 0.0))) / (2.0 * c)


def c_gamma(spec: ModelSpec, tol: float = ROOT_TOL) -> float:
    """Smallest c >= c_1 with d2 * gamma(c) <= d1."""
    c_b, c_1 = wave_speeds(spec)
    if spec.d2 * gamma(c_1, c_b, c_1) <= spec.d1:
        return c_1
    hi = 2.0 * c_1
    while spec.d2 * gamma(hi, c_b, c_1) > spec.d1:
        hi *= 2.0
    return bisect(lambda c: spec.d2 * gamma(c, c_b, c_1) - spec.d1, c_1, hi, tol)


# ----------------------------------------------------------- final tension (Q)

def adaptive_simpson(fn, a: float, b: float, tol: float = 1e-10, max_depth: int = 60) -> float:
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    fa, fb, m = fn(a), fn(b), 0.5 * (a + b)
    fm = fn(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2.0, depth - 1))

    return sign * rec(a, b, fa, fm, fb, whole, tol, max_depth)


def _check_q_form(g: CompiledExpr, spec: ModelSpec, n: int = 64) -> None:
    if spec.d2 != 0:
        raise PreconditionViolated("the Q construction needs d2 = 0")
    us = np.linspace(0.0, 2.0, n)
    if not np.allclose(spec.f.eval_on(us.shape, u=us), 1.0, rtol=0, atol=1e-12):
        raise PreconditionViolated("the Q construction needs f = 1")
    vs = np.linspace(0.0, 1.0, n)[1:-1]
    gv = np.asarray(g.eval_on(vs.shape, v=vs))
    if not np.all(gv < 0):
        raise PreconditionViolated("G must be negative on (0,1)")
    U, V = np.meshgrid(us, vs, indexing="ij")
    psi = np.asarray(spec.psi.eval_on(U.shape, u=U, v=V, x=0.0))
    if not np.allclose(psi, U * gv[None, :], rtol=1e-9, atol=1e-12):
        raise PreconditionViolated("psi is not of the form u*G(v)")


def q_function(g: CompiledExpr, spec: ModelSpec, anchor: float | None = None):
    """Primitive Q of (omega - r(v)) / G(v), anchored (Q = 0) at v_star by default."""
    a = v_star(spec) if anchor is None else anchor

    def integrand(s):
        return (spec.omega - spec.r_of(s)) / g.eval(v=s)

    return lambda v: adaptive_simpson(integrand, a, v)


def q_final_tension(g: CompiledExpr, spec: ModelSpec, tol: float = 1e-8) -> float:
    """Final tension V_inf in (0, v_star] solving Q(V_inf) = Q(v_b).

    Sign analysis: G < 0 on (0,1), and omega - r(v) is positive below v_star and
    negative above it, so Q decreases on (0, v_star) and increases on (v_star, 1).
    With Q anchored at v_star, Q(v_b) > 0 and the root is on the decreasing branch.
    """
    _check_q_form(g, spec)
    vs = v_star(spec)
    if not spec.v_b > vs:
        raise PreconditionViolated("q_final_tension needs v_b > v_star")
    Q = q_function(g, spec, vs)
    target = Q(spec.v_b)
    lo = 0.5 * vs
    while Q(lo) < target:
        lo *= 0.5
        if lo < 1e-300:
            raise BracketError("Q stays below Q(v_b) on (0, v_star]")
    return bisect(lambda v: Q(v) - target, lo, vs, tol)
