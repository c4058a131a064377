import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from unrest.errors import (
    BracketError,
    NoPositiveRoot,
    PreconditionViolated,
    SubcriticalTension,
)
from unrest.model import (
    ModelSpec,
    adaptive_simpson,
    bisect,
    c_gamma,
    find_saturation,
    gamma,
    linear_growth,
    q_final_tension,
    q_function,
    u_star,
    v_star,
    validate_model,
    wave_speeds,
)


def spec(**kw):
    base = dict(d1=1, d2=1, omega=1 / 3, r="v", f="1-u", psi="-u*v", v_b=0.6)
    base.update(kw)
    return ModelSpec.from_strings(**base)


RIOT = dict(omega=0.5, r="5*v", v_b=0.15)  # tension-inhibiting example with v_star = 0.1


# ---------------------------------------------------------------- validation

def test_inhibiting_example_passes():
    rep = validate_model(spec(**RIOT))
    assert rep.passed and rep.tension_inhibiting and rep.tension_enhancing is False


def test_enhancing_flag_and_saturation():
    rep = validate_model(spec(psi="u*v*(1-v)", v_b=0.4))
    assert rep.passed and rep.tension_enhancing and rep.saturation_M == 1.0
    assert not rep.tension_inhibiting


def test_threshold_assumption_fails_with_witness():
    rep = validate_model(spec(omega=2))
    bad = [c for c in rep.checks if not c.passed]
    assert [c.name[:2] for c in bad] == ["d)"]
    assert bad[0].witness == {"v": 1.0}


def test_mixed_sign_sets_neither_flag():
    rep = validate_model(spec(psi="u*v*(1-v)*(v-1/2)", v_b=0.4))
    assert rep.passed and not rep.tension_inhibiting and rep.tension_enhancing is False


def test_increasing_f_fails():
    rep = validate_model(spec(f="1+u"))
    assert not rep.passed
    assert not [c for c in rep.checks if c.name.startswith("b)")][0].passed


def test_unstable_base_state_fails():
    # psi(0, v) = v - v_b pushes v away from v_b
    rep = validate_model(spec(psi="v - 0.6 - u*v"))
    assert not [c for c in rep.checks if c.name.startswith("e)")][0].passed


def test_every_failure_has_witness():
    rep = validate_model(spec(f="1+u", omega=2, psi="v - 0.6", v_b=0.6))
    for c in rep.checks:
        if not c.passed:
            assert c.witness


def test_resolution_floor():
    with pytest.raises(ValueError):
        validate_model(spec(), n=32)


def test_saturation_search():
    assert find_saturation(spec(f="1-u/3")) == 4.0
    assert find_saturation(spec(f="1")) is None


# ---------------------------------------------------------------- scalars

def test_v_star_values():
    assert v_star(spec(**RIOT)) == pytest.approx(0.1, abs=1e-10)
    assert v_star(spec()) == pytest.approx(1 / 3, abs=1e-10)
    assert v_star(spec(omega=0.5, f="1")) == pytest.approx(0.5, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 5), st.floats(0.05, 0.95), st.floats(0.5, 2))
def test_v_star_solves_threshold(a, vs, f0):
    m = spec(r=f"{a!r}*v", f=f"{f0!r}*(1-u)", omega=a * vs * f0)
    assert v_star(m) == pytest.approx(vs, abs=1e-9)


def test_u_star():
    assert u_star(spec(), 1.0) == pytest.approx(2 / 3, abs=1e-10)
    assert u_star(spec(), 0.6) == pytest.approx(1 - (1 / 3) / 0.6, abs=1e-10)
    assert u_star(spec(f="exp(-u)"), 1.0) == pytest.approx(math.log(3), abs=1e-9)
    with pytest.raises(NoPositiveRoot):
        u_star(spec(), 0.2)


def test_linear_growth():
    assert linear_growth(spec(**RIOT)) == pytest.approx(0.25, abs=1e-14)
    assert linear_growth(spec(v_b=0.2)) < 0


def test_wave_speeds():
    c_b, c_1 = wave_speeds(spec(**RIOT))
    assert c_b == pytest.approx(1.0, abs=1e-12)
    c_b, c_1 = wave_speeds(spec(v_b=0.9))
    assert c_b == pytest.approx(2 * math.sqrt(0.9 - 1 / 3), abs=1e-12)
    assert c_b == pytest.approx(1.5055, abs=1e-4)
    assert c_1 == pytest.approx(1.6330, abs=1e-4)


def test_subcritical_tension_keeps_c1():
    with pytest.raises(SubcriticalTension) as info:
        wave_speeds(spec(v_b=0.3))
    assert info.value.c_1 == pytest.approx(2 * math.sqrt(2 / 3))


def test_gamma_at_c1():
    c_b, c_1 = wave_speeds(spec(v_b=0.4))
    assert gamma(c_1, c_b, c_1) == pytest.approx(math.sqrt(c_1 ** 2 - c_b ** 2) / (2 * c_1))


@pytest.mark.parametrize("d2,v_b", [(20, 0.4), (20, 0.9), (5, 0.5), (1, 0.5)])
def test_c_gamma_against_brentq(d2, v_b):
    m = spec(d2=d2, psi="u*v*(1-v)", v_b=v_b)
    c_b, c_1 = wave_speeds(m)
    g = lambda c: d2 * (math.sqrt(c * c - c_b * c_b) - math.sqrt(c * c - c_1 * c_1)) / (2 * c) - 1.0
    want = c_1 if g(c_1) <= 0 else brentq(g, c_1, 100 * c_1, xtol=1e-13)
    assert c_gamma(m) == pytest.approx(want, abs=1e-8)


def test_bisect():
    assert bisect(lambda z: z * z - 2, 0, 2) == pytest.approx(math.sqrt(2), abs=1e-10)
    with pytest.raises(BracketError):
        bisect(lambda z: z * z + 1, -1, 1)


# ---------------------------------------------------------------- final tension via Q

@pytest.mark.parametrize("fn,a,b,want", [
    (math.sin, 0.0, math.pi, 2.0),
    (lambda s: 1 / s, 1.0, math.e, 1.0),
    (lambda s: s ** 3, 2.0, 0.0, -4.0),
])
def test_adaptive_simpson(fn, a, b, want):
    assert adaptive_simpson(fn, a, b) == pytest.approx(want, abs=1e-9)


def si(v_b, beta=1.0, omega=0.5):
    return ModelSpec.from_strings(d1=1, d2=0, omega=omega, r="v", f="1", psi=f"-{beta!r}*u*v",
                                  g=f"-{beta!r}*v", v_b=v_b)


def closed_form_vinf(v_b, omega):
    # Q(v) = (v - omega ln v)/beta up to a constant for r = v, G = -beta v
    h = lambda v: v - omega * math.log(v)
    return brentq(lambda v: h(v) - h(v_b), 1e-12, omega, xtol=1e-14)


@pytest.mark.parametrize("v_b", [0.6, 0.75, 0.9])
def test_q_final_tension_closed_form(v_b):
    m = si(v_b)
    assert q_final_tension(m.g, m) == pytest.approx(closed_form_vinf(v_b, 0.5), abs=1e-7)


def test_q_final_tension_value():
    m = si(0.9)
    assert q_final_tension(m.g, m) == pytest.approx(0.2408, abs=1e-4)


def test_q_matches_scipy_quad():
    m = ModelSpec.from_strings(d1=1, d2=0, omega=0.5, r="v^2+v/2", f="1", psi="-u*v*(2-v)",
                               g="-v*(2-v)", v_b=0.8)
    Q = q_function(m.g, m)
    vs = v_star(m)
    integrand = lambda s: (m.omega - m.r_of(s)) / m.g.eval(v=s)
    for v in (0.1, 0.3, 0.8):
        assert Q(v) == pytest.approx(quad(integrand, vs, v, epsabs=1e-12)[0], abs=1e-8)
    target = Q(0.8)
    want = brentq(lambda v: quad(integrand, vs, v, epsabs=1e-13)[0] - target, 1e-6, vs, xtol=1e-12)
    assert q_final_tension(m.g, m) == pytest.approx(want, abs=1e-7)


def test_q_preconditions():
    m = si(0.9)
    with pytest.raises(PreconditionViolated):
        q_final_tension(m.g, ModelSpec.from_strings(d1=1, d2=1, omega=0.5, r="v", f="1", psi="-u*v",
                                                   g="-v", v_b=0.9))
    with pytest.raises(PreconditionViolated):
        q_final_tension(m.g, si(0.3))
    bad = ModelSpec.from_strings(d1=1, d2=0, omega=0.5, r="v", f="1", psi="-u*v^2", g="-v", v_b=0.9)
    with pytest.raises(PreconditionViolated):
        q_final_tension(bad.g, bad)


def test_vinf_below_v_star():
    for v_b in np.linspace(0.55, 0.95, 5):
        m = si(float(v_b))
        assert q_final_tension(m.g, m) < v_star(m)


def test_fingerprint_stable_and_sensitive():
    assert spec().fingerprint() == spec().fingerprint()
    assert spec().fingerprint() != spec(v_b=0.61).fingerprint()
