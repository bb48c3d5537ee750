"""Reward terms and termination against scalar oracles and telescoping sums."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from racesim.dynamics import DroneState
from racesim.quat import euler_to_quat
from racesim.rewards import (NO_TERMINATION, RewardBreakdown, check_termination,
                             crossing_ratio, gate_reward, progress_reward,
                             rate_penalty, step_reward)
from racesim.track import GateCrossing

F_C = 90.0

# high-precision scalar oracle: (e^17 - 1) / (2 * 90 * 1e5)
RATE_AT_CAP = (math.exp(17.0) - 1.0) / 1.8e7


def state_at(z=-2.0, v_down=0.0, phi=0.0, theta=0.0, rates=(0.0, 0.0, 0.0)):
    return DroneState(
        pos=np.array([0.0, 0.0, z]),
        quat=euler_to_quat(phi, theta, 0.0),
        vel=np.array([0.0, 0.0, v_down]),
        rates=np.array(rates, dtype=float),
        motors=np.full(4, 1000.0),
    )


# -- rate penalty -----------------------------------------------------------------

def test_rate_penalty_zero_at_rest():
    assert rate_penalty(np.zeros(3), F_C) == 0.0


def test_rate_penalty_at_cap_matches_oracle():
    assert RATE_AT_CAP == pytest.approx(1.34194, abs=1e-5)
    assert rate_penalty(np.array([17.0, 0.0, 0.0]), F_C) == pytest.approx(RATE_AT_CAP, rel=1e-12)


def test_rate_penalty_saturates_beyond_cap():
    at_cap = rate_penalty(np.array([9.0, 5.0, 3.0]), F_C)
    beyond = rate_penalty(np.array([10.0, 6.0, 4.0]), F_C)
    assert beyond == at_cap == pytest.approx(RATE_AT_CAP, rel=1e-12)


def test_rate_penalty_uses_l1_norm_and_monotone():
    lo = rate_penalty(np.array([1.0, -1.0, 1.0]), F_C)
    hi = rate_penalty(np.array([2.0, -2.0, 2.0]), F_C)
    assert 0.0 < lo < hi
    assert rate_penalty(np.array([3.0, 0.0, 0.0]), F_C) == pytest.approx(
        rate_penalty(np.array([-1.0, 1.0, -1.0]), F_C), rel=1e-12)


def test_rate_penalty_needs_positive_frequency():
    with pytest.raises(ValueError):
        rate_penalty(np.zeros(3), 0.0)


# -- progress -----------------------------------------------------------------------

def test_progress_is_distance_delta():
    prev = np.array([5.0, 0.0, 0.0])
    curr = np.array([4.8, 0.0, 0.0])
    assert progress_reward(prev, curr, False) == pytest.approx(0.2, abs=1e-12)


def test_progress_zero_in_tunnel_and_stationary():
    assert progress_reward([3.0, 1.0, 0.0], [0.1, 0.0, 0.0], True) == 0.0
    p = np.array([2.0, -1.0, 0.5])
    assert progress_reward(p, p, False) == 0.0


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50)),
                min_size=2, max_size=30))
@settings(max_examples=100, deadline=None)
def test_progress_telescopes_over_any_path(points):
    pts = [np.array(p) for p in points]
    total = sum(progress_reward(a, b, False) for a, b in zip(pts[:-1], pts[1:]))
    expected = np.linalg.norm(pts[0]) - np.linalg.norm(pts[-1])
    assert total == pytest.approx(expected, abs=1e-9)


# -- gate reward ----------------------------------------------------------------------

def cross(y, z, kind="main", gate_index=0):
    return GateCrossing(gate_index=gate_index, y_g=y, z_g=z, kind=kind)


def test_gate_reward_center_edge_and_interior():
    assert gate_reward(cross(0.0, 0.0), 1.0) == 1.0
    assert gate_reward(cross(0.3, -0.4), 1.0) == pytest.approx(0.6, abs=1e-12)
    assert gate_reward(cross(1.0, 0.0), 1.0) == 0.0


def test_crossing_ratio_flags_outside():
    assert crossing_ratio(cross(1.2, 0.0), 1.0) > 1.0
    assert crossing_ratio(cross(0.7, -0.2), 1.0) == pytest.approx(0.7)


# -- termination -----------------------------------------------------------------------

def test_gate_collision_on_wide_crossing():
    r = check_termination(state_at(), [cross(1.2, 0.0)], 1.0)
    assert r.kind == "gate_collision"
    # pre/post crossings collide the same way
    r = check_termination(state_at(), [cross(0.0, -1.01, kind="post")], 1.0)
    assert r.kind == "gate_collision"


def test_high_altitude_never_ground_collides():
    r = check_termination(state_at(z=-2.0, v_down=5.0, phi=1.5), [], 1.0)
    assert r.kind == "none"


def test_ground_predicate_branches():
    # tilt branch: 70 degrees roll at 0.3 m altitude
    r = check_termination(state_at(z=-0.3, phi=math.radians(70.0)), [], 1.0)
    assert r.kind == "ground_collision"
    # fast-descent branch
    r = check_termination(state_at(z=-0.3, v_down=1.5), [], 1.0)
    assert r.kind == "ground_collision"
    # slow, level, near ground: fine
    r = check_termination(state_at(z=-0.3), [], 1.0)
    assert r.kind == "none"
    # boundary: exactly pi/3 tilt does not fire (strict inequality)
    r = check_termination(state_at(z=-0.3, theta=math.pi / 3.0), [], 1.0)
    assert r.kind == "none"


# -- aggregate --------------------------------------------------------------------------

def test_step_reward_weighted_sum():
    bd, reason = step_reward(np.array([5.0, 0, 0]), np.array([4.8, 0, 0]), False,
                             state_at(), [], 1.0, F_C)
    assert reason == NO_TERMINATION
    assert bd.total == pytest.approx(5.0 * 0.2, abs=1e-12)
    assert bd.r_gate == 0.0


def test_step_reward_center_crossing_pays_thirty():
    bd, reason = step_reward(np.zeros(3), np.zeros(3), True, state_at(),
                             [cross(0.0, 0.0)], 1.0, F_C)
    assert not reason.terminated
    assert bd.total == pytest.approx(30.0, abs=1e-12)


def test_step_reward_sums_multiple_crossings():
    bd, _ = step_reward(np.zeros(3), np.zeros(3), True, state_at(),
                        [cross(0.0, 0.0, kind="pre"), cross(0.5, 0.0, kind="main")],
                        1.0, F_C)
    assert bd.r_gate == pytest.approx(1.0 + 0.5, abs=1e-12)
    assert bd.total == pytest.approx(45.0, abs=1e-12)


def test_terminal_step_zeroes_everything():
    bd, reason = step_reward(np.array([5.0, 0, 0]), np.array([4.0, 0, 0]), False,
                             state_at(z=-0.3, v_down=2.0), [cross(0.2, 0.0)], 1.0, F_C)
    assert reason.terminated
    assert bd == RewardBreakdown.zero()
    bd2, reason2 = step_reward(np.zeros(3), np.zeros(3), False, state_at(),
                               [cross(1.5, 0.0)], 1.0, F_C)
    assert reason2.kind == "gate_collision"
    assert bd2.total == 0.0


def test_breakdown_total_matches_weighted_sum():
    rng = np.random.default_rng(2)
    for _ in range(100):
        prev = rng.uniform(-10, 10, 3)
        curr = rng.uniform(-10, 10, 3)
        rates = rng.uniform(-4, 4, 3)
        crossings = [cross(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))] if rng.random() < 0.5 else []
        bd, reason = step_reward(prev, curr, False, state_at(rates=rates), crossings, 1.0, F_C)
        if not reason.terminated:
            assert bd.total == pytest.approx(5.0 * bd.r_prog - bd.r_rate + 30.0 * bd.r_gate,
                                             abs=1e-12)
