import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from unrest.errors import BlowUp, NotConverged
from unrest.model import ModelSpec, q_final_tension, v_star
from unrest.ode import integrate_to_rest, phase_metrics, simulate_homogeneous


def model(**kw):
    base = dict(d1=1, d2=0, omega=1 / 3, r="v", f="1-u", psi="-u*v", v_b=0.6)
    base.update(kw)
    return ModelSpec.from_strings(**base)


SI = model(omega=0.5, f="1", psi="-u*v", g="-v", v_b=0.9)


def test_zero_activity_is_fixed():
    tr = simulate_homogeneous(model(), 0.0, 0.6, 0.1, 10.0)
    assert np.all(tr.u == 0) and np.all(tr.v == 0.6)
    assert tr.rate_end == 0.0


def test_enhancing_goes_to_upheaval_state():
    tr, met = integrate_to_rest(model(psi="u*v*(1-v)", v_b=0.4), 0.2, 0.4)
    assert tr.u_end == pytest.approx(2 / 3, abs=1e-6)
    assert tr.v_end == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("v0", [0.6, 0.75, 0.9])
def test_si_final_tension_matches_q_root(v0):
    m = model(omega=0.5, f="1", psi="-u*v", g="-v", v_b=v0)
    _, met = integrate_to_rest(m, 1e-6, v0)
    assert met["v_inf"] == pytest.approx(q_final_tension(m.g, m), abs=1e-3)
    assert met["v_inf"] < v_star(m)


def test_si_tension_decreases_monotonically():
    tr = simulate_homogeneous(SI, 1e-6, 0.9, 0.01, 200.0, stride=10)
    assert np.all(np.diff(tr.v) <= 0)
    assert tr.max_u > 1e-3 and tr.u_end < tr.max_u


def test_against_scipy_reference():
    m = model()
    tr = simulate_homogeneous(m, 0.1, 0.9, 0.01, 20.0)
    ref = solve_ivp(lambda t, y: [y[0] * (y[1] * (1 - y[0]) - 1 / 3), -y[0] * y[1]],
                    (0, 20), [0.1, 0.9], rtol=1e-12, atol=1e-13)
    assert tr.u_end == pytest.approx(ref.y[0, -1], abs=1e-9)
    assert tr.v_end == pytest.approx(ref.y[1, -1], abs=1e-9)


def test_fourth_order():
    m = model()
    ref = simulate_homogeneous(m, 0.1, 0.9, 0.001, 10.0)
    e = [abs(simulate_homogeneous(m, 0.1, 0.9, dt, 10.0).u_end - ref.u_end) for dt in (0.2, 0.1)]
    assert 12 < e[0] / e[1] < 20


def test_stride_keeps_last_sample():
    tr = simulate_homogeneous(model(), 0.1, 0.9, 0.1, 1.0, stride=4)
    assert list(tr.t) == pytest.approx([0.0, 0.4, 0.8, 1.0])
    assert len(tr.samples) == len(tr.t)


def test_not_converged():
    tr = simulate_homogeneous(SI, 1e-6, 0.9, 0.1, 1.0)
    with pytest.raises(NotConverged):
        phase_metrics(tr)
    with pytest.raises(NotConverged):
        integrate_to_rest(SI, 1e-6, 0.9, t_end=1.0, cap=4.0)


def test_blow_up():
    m = model(f="1+u", psi="0")
    with pytest.raises(BlowUp):
        simulate_homogeneous(m, 1.0, 0.9, 0.01, 50.0)


@pytest.mark.parametrize("u0,v0,dt", [(-0.1, 0.5, 0.1), (0.1, 1.0, 0.1), (0.1, 0.5, 0.0)])
def test_bad_inputs(u0, v0, dt):
    with pytest.raises(ValueError):
        simulate_homogeneous(model(), u0, v0, dt, 1.0)


# higher starting tension ignites harder and burns lower
@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 0.85), st.floats(0.02, 0.1))
def test_monotone_in_initial_tension(v_lo, gap):
    m = model(omega=0.5, r="5*v", psi="-u*v")
    v_hi = v_lo + gap
    a, ma = integrate_to_rest(m, 0.01, v_lo, dt=0.02)
    b, mb = integrate_to_rest(m, 0.01, v_hi, dt=0.02)
    assert mb["v_inf"] <= ma["v_inf"] + 1e-9
    assert mb["max_u"] > ma["max_u"]
    assert mb["v_inf"] < v_star(m) + 1e-9
