"""Dynamics oracles: scalar recomputations, reference integrations, fixed points."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from racesim.dynamics import (GRAVITY, DisturbanceSample, DroneState, DynamicsParams,
                              clamp_action, command_for_speed, compute_angular_accel,
                              compute_specific_force, hover_command, hover_speed,
                              hover_state, hover_trim, max_specific_thrust,
                              motor_steady_speed, rk4_step, state_derivative)
from racesim.quat import euler_to_quat

NOMINAL = DynamicsParams.nominal()


def zero_dist():
    return DisturbanceSample.zero()


# -- motor curve --------------------------------------------------------------

def test_motor_full_command_hits_max():
    assert motor_steady_speed(1.0, 0.0, NOMINAL) == pytest.approx(3100.0, abs=1e-9)


def test_motor_zero_command_hits_min():
    assert motor_steady_speed(0.0, 0.0, NOMINAL) == pytest.approx(341.75, abs=1e-9)


def test_motor_half_command_matches_scalar_oracle():
    # independent scalar evaluation: sqrt(0.5*0.25 + 0.5*0.5) * (3100-341.75) + 341.75
    oracle = math.sqrt(0.375) * 2758.25 + 341.75
    assert oracle == pytest.approx(2030.826270757925, abs=1e-9)
    assert motor_steady_speed(0.5, 0.0, NOMINAL) == pytest.approx(oracle, abs=1e-12)


def test_motor_disturbance_clamps():
    assert motor_steady_speed(0.9, 0.5, NOMINAL) == pytest.approx(3100.0)
    assert motor_steady_speed(0.1, -0.5, NOMINAL) == pytest.approx(341.75)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=200, deadline=None)
def test_motor_monotone_and_in_range(a, b):
    lo, hi = sorted((a, b))
    w_lo = motor_steady_speed(lo, 0.0, NOMINAL)
    w_hi = motor_steady_speed(hi, 0.0, NOMINAL)
    assert w_lo <= w_hi + 1e-12
    assert NOMINAL.omega_min - 1e-9 <= w_lo <= NOMINAL.omega_max + 1e-9


def test_command_for_speed_inverts_curve():
    for w in (341.75, 800.0, 1257.88, 2500.0, 3100.0):
        u = command_for_speed(w, NOMINAL)
        assert motor_steady_speed(u, 0.0, NOMINAL) == pytest.approx(w, abs=1e-8)


# -- specific force ------------------------------------------------------------

def test_force_at_rest_is_pure_thrust():
    w = 1500.0
    f = compute_specific_force(np.zeros(3), np.full(4, w), NOMINAL)
    assert f[0] == 0.0 and f[1] == 0.0
    assert f[2] == pytest.approx(-4.0 * NOMINAL.k_w * w * w, rel=1e-12)


def test_force_ceiling_matches_scalar_oracle():
    # -4 * 1.55e-6 * 3100^2 = -59.582 exactly in this parameterization
    f = compute_specific_force(np.zeros(3), np.full(4, 3100.0), NOMINAL)
    assert f[2] == pytest.approx(-59.582, rel=1e-9)
    assert max_specific_thrust(NOMINAL) == pytest.approx(59.582, rel=1e-9)
    # 6.073 g, consistent with the advertised ~6 g ceiling
    assert f[2] / -GRAVITY == pytest.approx(6.0736, abs=1e-3)


def test_force_at_hover_speed_balances_gravity():
    wh = hover_speed(NOMINAL)
    assert wh == pytest.approx(math.sqrt(GRAVITY / (4.0 * 1.55e-6)), rel=1e-12)
    f = compute_specific_force(np.zeros(3), np.full(4, wh), NOMINAL)
    assert f[2] == pytest.approx(-GRAVITY, rel=1e-12)


def test_force_z_nonpositive_in_flight_envelope():
    rng = np.random.default_rng(7)
    for _ in range(500):
        v = rng.uniform(-20, 20, 3)
        w = rng.uniform(341.75, 3100.0, 4)
        f = compute_specific_force(v, w, NOMINAL)
        assert f[2] <= 0.0


# -- moments -------------------------------------------------------------------

def test_moments_all_zero_inputs():
    m = compute_angular_accel(np.zeros(4), np.zeros(4), np.zeros(3), NOMINAL)
    assert np.all(m == 0.0)


def test_single_motor_roll_moment():
    # -k_p1 * 1000^2 = -4.99e-5 * 1e6 = -49.9
    m = compute_angular_accel(np.array([1000.0, 0, 0, 0]), np.zeros(4), np.zeros(3), NOMINAL)
    assert m[0] == pytest.approx(-49.9, rel=1e-12)


def test_gyroscopic_terms_match_scalar_oracle():
    # (J_x*q*r, J_y*p*r, J_z*p*q) at rates (1, 2, 3)
    m = compute_angular_accel(np.zeros(4), np.zeros(4), np.array([1.0, 2.0, 3.0]), NOMINAL)
    assert m == pytest.approx([-0.89 * 6.0, 0.96 * 3.0, -0.34 * 2.0], rel=1e-12)
    assert m == pytest.approx([-5.34, 2.88, -0.68], rel=1e-12)


def test_motor_accel_terms_enter_yaw():
    m = compute_angular_accel(np.zeros(4), np.array([100.0, 0, 0, 0]), np.zeros(3), NOMINAL)
    assert m[2] == pytest.approx(-NOMINAL.k_r5 * 100.0, rel=1e-12)
    assert m[0] == 0.0 and m[1] == 0.0


# -- state derivative -----------------------------------------------------------

def test_quaternion_rate_zero_at_rest():
    s = DroneState(np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3),
                   np.full(4, 1000.0))
    d = state_derivative(s, s.motors, zero_dist(), NOMINAL)
    assert np.all(d.quat == 0.0)


def test_hover_is_full_equilibrium_for_symmetric_airframe():
    # equal-speed hover balances moments only when the per-rotor coefficients
    # are symmetric; the force balance holds either way
    p = NOMINAL.with_symmetric_moments()
    s = hover_state(p, np.array([0.0, 0.0, -2.0]))
    d = state_derivative(s, s.motors, zero_dist(), p)
    assert np.linalg.norm(d.as_vector()) < 1e-9


def test_asymmetric_airframe_hover_carries_pitch_moment():
    s = hover_state(NOMINAL, np.array([0.0, 0.0, -2.0]))
    d = state_derivative(s, s.motors, zero_dist(), NOMINAL)
    # real identified coefficients: equal speeds leave a net moment
    assert abs(d.rates[1]) > 1.0


def test_motor_lag_derivative():
    s = DroneState(np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3),
                   np.full(4, 1000.0))
    d = state_derivative(s, np.full(4, 2000.0), zero_dist(), NOMINAL)
    assert d.motors == pytest.approx(np.full(4, (2000.0 - 1000.0) / 0.03), rel=1e-12)


def test_disturbances_are_additive():
    s = hover_state(NOMINAL, np.array([0.0, 0.0, -2.0]))
    dist = DisturbanceSample(np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.0, -0.1]),
                             np.zeros(4))
    d0 = state_derivative(s, s.motors, zero_dist(), NOMINAL)
    d1 = state_derivative(s, s.motors, dist, NOMINAL)
    assert d1.vel - d0.vel == pytest.approx(dist.eps_a, abs=1e-12)
    assert d1.rates - d0.rates == pytest.approx(dist.eps_m, abs=1e-12)


# -- hover trim -----------------------------------------------------------------

def test_hover_trim_balances_thrust_and_moments():
    speeds, commands = hover_trim(NOMINAL)
    assert NOMINAL.k_w * np.sum(speeds ** 2) == pytest.approx(GRAVITY, abs=1e-10)
    m = compute_angular_accel(speeds, np.zeros(4), np.zeros(3), NOMINAL)
    assert np.linalg.norm(m) < 1e-10
    assert np.all((commands >= 0.0) & (commands <= 1.0))
    for w, u in zip(speeds, commands):
        assert motor_steady_speed(u, 0.0, NOMINAL) == pytest.approx(w, abs=1e-7)


def test_hover_command_is_scalar_trim_for_symmetric_airframe():
    p = NOMINAL.with_symmetric_moments()
    speeds, commands = hover_trim(p)
    assert speeds == pytest.approx(np.full(4, hover_speed(p)), rel=1e-12)
    assert commands == pytest.approx(np.full(4, hover_command(p)), rel=1e-10)


# -- RK4 -------------------------------------------------------------------------

def _integrate(state, actions, params, dt_coarse, substeps, dist=None):
    """Piecewise-constant actions on the coarse grid; each interval split
    into `substeps` RK4 steps (all refinements see the same command signal)."""
    s = state.copy()
    dist = dist or zero_dist()
    for u in actions:
        for _ in range(substeps):
            s = rk4_step(s, u, dist, params, dt_coarse / substeps)
    return s


def test_rk4_holds_equilibrium():
    p = NOMINAL.with_symmetric_moments()
    s = hover_state(p, np.array([1.0, 2.0, -3.0]))
    u = np.full(4, hover_command(p))
    out = rk4_step(s, u, zero_dist(), p, 1.0 / 450.0)
    assert np.linalg.norm(out.as_vector() - s.as_vector()) < 1e-9


def test_rk4_free_fall_matches_reference():
    # rotors pinned at omega_min, level attitude; oracle = same ODE at dt/100
    s = DroneState(np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3),
                   np.full(4, NOMINAL.omega_min))
    p = NOMINAL.with_symmetric_moments()
    actions = [np.zeros(4)] * 45  # 0.5 s at 90 Hz
    coarse = _integrate(s, actions, p, 1.0 / 90.0, 5)
    ref = _integrate(s, actions, p, 1.0 / 90.0, 500)
    assert coarse.vel[2] == pytest.approx(ref.vel[2], abs=1e-9)
    # sanity: falls slower than pure gravity because residual thrust remains
    assert 0.0 < coarse.vel[2] < GRAVITY * 0.5


def test_rk4_fourth_order_convergence():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        state = DroneState(np.zeros(3), euler_to_quat(*rng.uniform(-0.3, 0.3, 3)),
                           rng.uniform(-3, 3, 3), rng.uniform(-2, 2, 3),
                           rng.uniform(800, 2500, 4))
        dt = 1.0 / 450.0
        n = 45
        phases = rng.uniform(0, 2 * np.pi, 4)
        actions = [0.5 + 0.45 * np.sin(2 * np.pi * 3.0 * k * dt + phases) for k in range(n)]
        y1 = _integrate(state, actions, NOMINAL, dt, 1).as_vector()
        y2 = _integrate(state, actions, NOMINAL, dt, 2).as_vector()
        ref = _integrate(state, actions, NOMINAL, dt, 100).as_vector()
        ratio = np.linalg.norm(y1 - ref) / np.linalg.norm(y2 - ref)
        assert 8.0 <= ratio <= 32.0


def test_rk4_quaternion_stays_unit():
    rng = np.random.default_rng(3)
    s = DroneState(np.zeros(3), euler_to_quat(0.2, -0.1, 0.5), rng.uniform(-5, 5, 3),
                   rng.uniform(-6, 6, 3), rng.uniform(400, 3000, 4))
    for _ in range(200):
        s = rk4_step(s, rng.uniform(0, 1, 4), zero_dist(), NOMINAL, 1.0 / 450.0)
        assert abs(np.linalg.norm(s.quat) - 1.0) < 1e-9


def test_rk4_motors_clamped_nonnegative():
    s = DroneState(np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3), np.zeros(3),
                   np.zeros(4))
    out = rk4_step(s, np.zeros(4), zero_dist(), NOMINAL, 1.0 / 450.0)
    assert np.all(out.motors >= 0.0)


def test_rk4_bit_determinism():
    rng = np.random.default_rng(11)
    s = DroneState(rng.uniform(-5, 5, 3), euler_to_quat(0.1, 0.2, 0.3),
                   rng.uniform(-5, 5, 3), rng.uniform(-3, 3, 3), rng.uniform(500, 3000, 4))
    u = rng.uniform(0, 1, 4)
    dist = DisturbanceSample(rng.uniform(-2, 2, 3), rng.uniform(-5, 5, 3),
                             rng.uniform(-0.1, 0.1, 4))
    a = rk4_step(s, u, dist, NOMINAL, 1.0 / 450.0).as_vector()
    b = rk4_step(s, u, dist, NOMINAL, 1.0 / 450.0).as_vector()
    assert np.array_equal(a, b)


def test_rk4_rejects_bad_dt_and_action():
    s = hover_state(NOMINAL, np.zeros(3))
    with pytest.raises(ValueError):
        rk4_step(s, np.zeros(4), zero_dist(), NOMINAL, 0.0)
    with pytest.raises(ValueError):
        clamp_action(np.array([0.1, np.nan, 0.2, 0.3]))
    assert np.all(clamp_action(np.array([-1.0, 2.0, 0.5, 1.0])) == [0.0, 1.0, 0.5, 1.0])


def test_params_vector_roundtrip():
    vec = NOMINAL.as_vector()
    assert vec.shape == (32,)
    again = DynamicsParams.from_vector(vec)
    assert np.array_equal(again.as_vector(), vec)


def test_params_validation():
    with pytest.raises(ValueError):
        DynamicsParams(omega_min=3200.0)
    with pytest.raises(ValueError):
        DynamicsParams(tau=0.0)
    with pytest.raises(ValueError):
        DynamicsParams(k=1.5)
