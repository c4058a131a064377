import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unrest.errors import (
    BlowUp,
    CFLViolation,
    FrontTooClose,
    Interrupted,
    InvalidInitialData,
    PositivityViolation,
)
from unrest.expr import compile_source
from unrest.model import ModelSpec
from unrest.pde import (
    GridSpec,
    SimParams,
    _enforce_bounds,
    _laplacian,
    check_cfl,
    front_position,
    initial_state,
    simulate,
    step,
)


def xexpr(src, consts=None):
    return compile_source(src, ("x",), consts)


def model(**kw):
    base = dict(d1=1, d2=1, omega=1 / 3, r="v", f="1-u", psi="-u*v", v_b=0.6)
    base.update(kw)
    return ModelSpec.from_strings(**base)


RIOT = model(omega=0.5, r="5*v", v_b=0.15)


def test_grid_nodes():
    g = GridSpec(400, 1)
    assert g.n == 801 and g.x[g.center] == 0.0 and g.x[0] == -400 and g.x[-1] == 400
    assert GridSpec(10, 0.5).n == 41


@pytest.mark.parametrize("hw,dx", [(10, 0.3), (0.5, 1.0), (10, 0)])
def test_grid_rejects_bad_shapes(hw, dx):
    with pytest.raises(ValueError):
        GridSpec(hw, dx)


def test_cfl():
    check_cfl(model(d2=9.9), GridSpec(10, 1), 0.05)
    with pytest.raises(CFLViolation):
        check_cfl(model(d2=10), GridSpec(10, 1), 0.05)
    with pytest.raises(CFLViolation):
        simulate(model(d2=20), initial_state(GridSpec(10, 1), xexpr("0.1"), xexpr("0.5")),
                 GridSpec(10, 1), SimParams(0.05, 1.0))


def test_initial_data_checks():
    g = GridSpec(10, 1)
    with pytest.raises(InvalidInitialData):
        initial_state(g, xexpr("0.1"), xexpr("1.5"))
    with pytest.raises(InvalidInitialData):
        initial_state(g, xexpr("x"), xexpr("0.5"))
    with pytest.warns(UserWarning):
        s = initial_state(g, xexpr("0"), xexpr("0.5"))
    assert np.all(s.u == 0)


def test_zero_activity_is_stationary():
    g = GridSpec(20, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s0 = initial_state(g, xexpr("0"), xexpr("0.5"))
    rec = simulate(model(v_b=0.5), s0, g, SimParams(0.05, 10.0))
    assert np.all(rec.final.u == 0) and np.all(rec.final.v == 0.5)


def test_golden_stencil_at_bump_centre():
    g = GridSpec(20, 1)
    s0 = initial_state(g, xexpr("0.2*pos(1 - x^2/100)"), xexpr("0.15"))
    s1 = step(s0, RIOT, g, 0.05)
    c = g.center
    # hand evaluation: neighbours 0.198, lap = -0.004, reaction 0.2*(0.75*0.8 - 0.5) = 0.02
    assert s1.u[c] == pytest.approx(0.2 + 0.05 * (-0.004 + 0.02), abs=1e-15)
    assert s1.v[c] == pytest.approx(0.15 - 0.05 * 0.2 * 0.15, abs=1e-15)
    assert s1.t == pytest.approx(0.05)
    assert s0.u[c] == 0.2  # input untouched


def test_constant_state_is_ode_step():
    g = GridSpec(10, 1)
    s0 = initial_state(g, xexpr("0.3"), xexpr("0.6"))
    s1 = step(s0, model(), g, 0.05)
    u_ode = 0.3 + 0.05 * 0.3 * (0.6 * 0.7 - 1 / 3)
    v_ode = 0.6 + 0.05 * (-0.3 * 0.6)
    assert np.allclose(s1.u, u_ode, rtol=0, atol=1e-15)
    assert np.allclose(s1.v, v_ode, rtol=0, atol=1e-15)


def test_decoupled_tension_stays_put():
    g = GridSpec(80, 1)
    s0 = initial_state(g, xexpr("0.2*pos(1-x^2)"), xexpr("0.8"))
    rec = simulate(model(psi="0", v_b=0.8), s0, g, SimParams(0.05, 20.0, (5.0, 10.0)))
    for s in rec.snapshots:
        assert np.all(s.v == 0.8)


def test_laplacian_neumann_reflection():
    w = np.array([1.0, 2.0, 4.0, 7.0])
    assert list(_laplacian(w, 1.0)) == [2.0, 1.0, 1.0, -6.0]
    assert list(_laplacian(np.ones(5), 0.5)) == [0.0] * 5


def test_bounds_enforcement():
    u = np.array([0.1, -5e-10])
    v = np.array([1 + 5e-10, 0.5])
    _enforce_bounds(u, v, 0.0)
    assert u[1] == 0.0 and v[0] == 1.0
    with pytest.raises(PositivityViolation):
        _enforce_bounds(np.array([-1e-6]), np.array([0.5]), 0.0)
    with pytest.raises(PositivityViolation):
        _enforce_bounds(np.array([0.0]), np.array([1.1]), 0.0)
    with pytest.raises(BlowUp):
        _enforce_bounds(np.array([np.nan]), np.array([0.5]), 0.0)


def test_stiff_reaction_aborts():
    g = GridSpec(10, 1)
    s0 = initial_state(g, xexpr("0.5"), xexpr("0.5"))
    with pytest.raises(PositivityViolation):
        step(s0, model(omega=100, r="100*v"), g, 0.05)


# ---------------------------------------------------------------- fronts

def test_front_triangle():
    x = np.arange(-20.0, 21.0)
    u = np.maximum(1 - np.abs(x) / 10, 0)
    assert front_position(u, x) == pytest.approx(-5.0)
    assert front_position(u, x, side="right") == pytest.approx(5.0)
    assert front_position(u, x, fraction=0.25) == pytest.approx(-7.5)


def test_front_absent_below_floor():
    x = np.arange(-5.0, 6.0)
    assert front_position(np.zeros_like(x), x) is None
    assert front_position(np.full_like(x, 1e-7), x) is None


def test_front_fraction_range():
    with pytest.raises(ValueError):
        front_position(np.ones(3), np.arange(3.0), fraction=1.0)


# ---------------------------------------------------------------- simulate

def test_snapshots_and_series():
    g = GridSpec(50, 1)
    s0 = initial_state(g, xexpr("0.2*pos(1 - x^2/100)"), xexpr("0.15"))
    rec = simulate(RIOT, s0, g, SimParams(0.05, 10.0, (0.0, 2.51, 5.0), 20))
    assert [s.t for s in rec.snapshots] == pytest.approx([0.0, 2.5, 5.0, 10.0])
    assert len(rec.series["t"]) == 11
    assert rec.series["t"][-1] == pytest.approx(10.0)
    assert rec.snapshot_at(4.9).t == pytest.approx(5.0)
    assert rec.fingerprint == RIOT.fingerprint()


def test_front_too_close():
    g = GridSpec(40, 1)
    s0 = initial_state(g, xexpr("0.2*pos(1-x^2)"), xexpr("0.9"))
    with pytest.raises(FrontTooClose):
        simulate(model(v_b=0.9), s0, g, SimParams(0.05, 100.0))


def test_observer_interrupts_with_partial_record():
    g = GridSpec(30, 1)
    s0 = initial_state(g, xexpr("0.2*pos(1-x^2)"), xexpr("0.6"))
    with pytest.raises(Interrupted) as info:
        simulate(model(), s0, g, SimParams(0.05, 50.0), observer=lambda s: s.t >= 5.0)
    rec = info.value.record
    assert rec.series["t"][-1] == pytest.approx(5.0)
    assert rec.final.t == pytest.approx(5.0)


def test_deterministic():
    g = GridSpec(60, 1)
    s0 = initial_state(g, xexpr("0.2*pos(1-x^2)"), xexpr("0.6"))
    a = simulate(model(), s0, g, SimParams(0.05, 20.0))
    b = simulate(model(), s0, g, SimParams(0.05, 20.0))
    assert np.array_equal(a.final.u, b.final.u) and np.array_equal(a.final.v, b.final.v)


def test_heterogeneous_psi_sees_x():
    # psi depends on x only through a factor that vanishes for x < 0
    m = model(psi="-u*v*step(x)")
    g = GridSpec(20, 1)
    s0 = initial_state(g, xexpr("0.2"), xexpr("0.6"))
    s1 = step(s0, m, g, 0.05)
    assert np.all(s1.v[g.x < 0] == 0.6) and np.all(s1.v[g.x > 0] < 0.6)


@settings(max_examples=25, deadline=None)
@given(st.integers(-8, 8), st.floats(0.4, 0.95))
def test_translation(k, v_b):
    g = GridSpec(60, 1)
    m = model(v_b=v_b)
    a = simulate(m, initial_state(g, xexpr("0.2*pos(1-x^2/4)"), xexpr(f"{v_b!r}")), g, SimParams(0.05, 10.0))
    b = simulate(m, initial_state(g, xexpr(f"0.2*pos(1-(x-{k})^2/4)"), xexpr(f"{v_b!r}")), g, SimParams(0.05, 10.0))
    inner = slice(25, g.n - 25)
    shifted = slice(25 + k, g.n - 25 + k)
    assert np.allclose(b.final.u[shifted], a.final.u[inner], rtol=0, atol=1e-13)
    assert np.allclose(b.final.v[shifted], a.final.v[inner], rtol=0, atol=1e-13)
