import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from oracle import plain_params, welfare_batch
from rice_game.dynamics import (State, _floor, consumption, constant_controls, damage_factor,
                                radiative_forcing, regional_emissions, simulate, step)
from rice_game.errors import ContractError

PARAMS, EXO = make_instance(8)


def _random_U(seed, steps=None, params=PARAMS):
    rng = np.random.default_rng(seed)
    steps = params.T + 1 if steps is None else steps
    U = rng.random((steps, params.n, 2))
    U[..., 1] *= params.s_max
    return U


def test_matches_reference_simulator():
    x = PARAMS.initial
    x0 = (x.t_at0, x.t_lo0, x.m_at0, x.m_up0, x.m_lo0, x.k0)
    U = np.stack([_random_U(s) for s in range(5)])
    ref = welfare_batch(plain_params(PARAMS), x0, U, EXO.L, EXO.A, EXO.sigma, EXO.e_land, EXO.f_ex)
    ours = np.stack([simulate(x, u, EXO, PARAMS).j for u in U])
    np.testing.assert_allclose(ours, ref, rtol=1e-12)


def test_step_agrees_with_simulate():
    U = _random_U(1)
    tr = simulate(PARAMS.initial, U, EXO, PARAMS)
    x = State.from_initial(PARAMS.initial)
    for t in range(U.shape[0]):
        x = step(t, x, U[t], EXO, PARAMS)
        np.testing.assert_allclose(x.as_vector(), tr.state(t + 1).as_vector(), rtol=1e-14)


def test_trajectory_shapes():
    tr = simulate(PARAMS.initial, _random_U(2), EXO, PARAMS)
    assert tr.steps == PARAMS.T + 1
    assert tr.t_at.shape == (PARAMS.T + 2,)
    assert tr.k.shape == (PARAMS.T + 2, PARAMS.n)
    assert tr.c.shape == (PARAMS.T + 1, PARAMS.n)
    assert tr.t_at[0] == PARAMS.initial.t_at0


def test_offset_start_uses_absolute_time():
    U = _random_U(3)
    full = simulate(PARAMS.initial, U, EXO, PARAMS)
    tail = simulate(full.state(3), U[3:], EXO, PARAMS, t0=3)
    np.testing.assert_allclose(tail.t_at, full.t_at[3:], rtol=1e-14)
    np.testing.assert_allclose(tail.g, full.g[3:], rtol=1e-14)
    np.testing.assert_allclose(tail.disc, full.disc[3:], rtol=1e-14)


def test_geophysical_update_is_affine_in_state():
    """Temperature and carbon layers respond linearly to the layer states."""
    U = constant_controls(1, PARAMS.n)
    a = State.from_initial(PARAMS.initial)
    b = State(a.t_at + 0.3, a.t_lo + 0.1, a.m_at, a.m_up + 20, a.m_lo - 40, a.k)
    mid = State(*(0.5 * (np.asarray(u) + np.asarray(v)) for u, v in zip(
        (a.t_at, a.t_lo, a.m_at, a.m_up, a.m_lo, a.k), (b.t_at, b.t_lo, b.m_at, b.m_up, b.m_lo, b.k))))
    ya, yb, ym = (step(0, s, U[0], EXO, PARAMS) for s in (a, b, mid))
    for name in ("t_lo", "m_up", "m_lo"):
        assert getattr(ym, name) == pytest.approx(0.5 * (getattr(ya, name) + getattr(yb, name)),
                                                  rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 0.95), st.floats(0.01, 0.04), st.integers(0, 7))
def test_abatement_lowers_emissions_and_consumption(mu, dmu, t):
    x = State.from_initial(PARAMS.initial)
    lo = np.full(PARAMS.n, mu)
    hi = lo + dmu
    e_lo = regional_emissions(PARAMS.regions, t, x, lo, EXO)
    e_hi = regional_emissions(PARAMS.regions, t, x, hi, EXO)
    assert np.all(e_hi < e_lo)
    s = np.full(PARAMS.n, 0.2)
    c_lo = consumption(t, x, np.stack([lo, s], axis=1), EXO, PARAMS)
    c_hi = consumption(t, x, np.stack([hi, s], axis=1), EXO, PARAMS)
    assert np.all(c_hi < c_lo)


def test_zero_abatement_has_no_cost():
    tr = simulate(PARAMS.initial, constant_controls(PARAMS.T + 1, PARAMS.n, mu=0.0), EXO, PARAMS)
    assert np.all(tr.abate == 1.0)


def test_floor_is_c1():
    eps = 1e-6
    x = np.array([-1.0, 0.0, 0.5 * eps, 2 * eps - 1e-15, 2 * eps, 3 * eps])
    v, slope, active = _floor(x, eps)
    assert v[0] == eps and slope[0] == 0
    assert v[-1] == x[-1] and slope[-1] == 1
    assert v[3] == pytest.approx(2 * eps, rel=1e-8) and slope[3] == pytest.approx(1.0, rel=1e-8)
    assert active.tolist() == [True, True, True, True, False, False]
    assert np.all(np.diff(v) >= 0)


def test_consumption_is_unsaved_net_output():
    U = constant_controls(PARAMS.T + 1, PARAMS.n, s=PARAMS.s_max)
    tr = simulate(PARAMS.initial, U, EXO, PARAMS)
    assert not tr.floor_active.any()
    np.testing.assert_allclose(tr.c, tr.net_output * (1 - PARAMS.s_max), rtol=1e-14)
    np.testing.assert_allclose(tr.net_output, tr.damage * tr.abate * tr.y_gross, rtol=1e-14)


def test_forcing_and_damage_helpers():
    g = PARAMS.geophys
    assert radiative_forcing(588.0, 0.0, g) == 0.0
    assert radiative_forcing(1176.0, 0.5, g) == pytest.approx(g.eta + 0.5, abs=1e-12)
    with pytest.raises(ContractError):
        radiative_forcing(0.0, 0.0, g)
    np.testing.assert_array_equal(damage_factor(PARAMS.regions, 0.0), 1.0)
    with pytest.warns(UserWarning):
        damage_factor(PARAMS.regions, -0.5)


def test_control_contract():
    with pytest.raises(ContractError):
        simulate(PARAMS.initial, np.zeros((3, PARAMS.n + 1, 2)), EXO, PARAMS)
    bad = constant_controls(3, PARAMS.n)
    bad[0, 0, 1] = 1.0
    with pytest.raises(ContractError):
        simulate(PARAMS.initial, bad, EXO, PARAMS)
    with pytest.raises(ContractError):
        simulate(PARAMS.initial, constant_controls(PARAMS.T + 5, PARAMS.n), EXO, PARAMS)


def test_extended_precision_agrees():
    U = _random_U(4)
    a = simulate(PARAMS.initial, U, EXO, PARAMS)
    b = simulate(PARAMS.initial, U, EXO, PARAMS, dtype=np.longdouble)
    np.testing.assert_allclose(a.j, b.j.astype(float), rtol=1e-12)


def test_deterministic():
    U = _random_U(5)
    a = simulate(PARAMS.initial, U, EXO, PARAMS)
    b = simulate(PARAMS.initial, U, EXO, PARAMS)
    assert np.array_equal(a.j, b.j) and np.array_equal(a.k, b.k)
