"""Per-step reward terms and episode termination.

r_total = 5 * r_prog - r_rate + 30 * r_gate

  * r_prog rewards reduction of the distance to the next pre-gate center and
    is zeroed while the drone is inside the tunnel (between pre- and post-gate).
  * r_rate penalizes the L1 norm of the body rates through a capped exponential.
  * r_gate is granted per clean plane crossing (pre, main and post all pay),
    maximal at the center and linearly decaying to zero at the opening edge.

A crossing beyond the opening (offset ratio > 1) is a gate collision, not a
reward; there is no separate collision penalty term. Ground contact uses a
shaped predicate that only fires close to the ground with fast descent or
large tilt. Steps that terminate carry a total reward of zero.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DroneState
from .quat import quat_to_euler
from .track import GateCrossing

PROGRESS_WEIGHT = 5.0
GATE_WEIGHT = 30.0
RATE_CAP = 17.0

GROUND_Z = -0.5          # predicate active when z_w is above this (NED: near ground)
GROUND_V_DOWN = 1.0      # m/s downward
GROUND_TILT = math.pi / 3.0


@dataclass(frozen=True)
class RewardBreakdown:
    r_prog: float
    r_rate: float
    r_gate: float
    total: float

    @classmethod
    def zero(cls) -> "RewardBreakdown":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class TerminationReason:
    kind: str             # "gate_collision" | "ground_collision" | "none"
    detail: str = ""

    @property
    def terminated(self) -> bool:
        return self.kind != "none"


NO_TERMINATION = TerminationReason("none")


def rate_penalty(rates, f_c: float) -> float:
    """Capped exponential penalty on the L1 norm of the body rates."""
    if f_c <= 0.0:
        raise ValueError("control frequency must be positive")
    l1 = abs(float(rates[0])) + abs(float(rates[1])) + abs(float(rates[2]))
    return (math.exp(min(l1, RATE_CAP)) - 1.0) / (2.0 * f_c * 1e5)


def progress_reward(p_prev_rel, p_curr_rel, in_tunnel: bool) -> float:
    """Distance-to-target decrease between two positions relative to the
    next pre-gate center; zero while inside the tunnel."""
    if in_tunnel:
        return 0.0
    prev = np.asarray(p_prev_rel, dtype=float)
    curr = np.asarray(p_curr_rel, dtype=float)
    return float(np.linalg.norm(prev) - np.linalg.norm(curr))


def gate_reward(crossing: GateCrossing, d_g: float) -> float:
    """1 - max(|y|, |z|) / d_g at the crossing point (1 at center, 0 at edge)."""
    return 1.0 - max(abs(crossing.y_g), abs(crossing.z_g)) / d_g


def crossing_ratio(crossing: GateCrossing, d_g: float) -> float:
    """Offset ratio of a crossing; > 1 means outside the opening."""
    return max(abs(crossing.y_g), abs(crossing.z_g)) / d_g


def check_termination(state: DroneState, crossings, d_g) -> TerminationReason:
    """Gate collision (any crossing with ratio > 1) or shaped ground collision.

    crossings: iterable of GateCrossing (pre/main/post all count).
    d_g: effective half-extent, or a callable crossing -> d_g.
    """
    for c in crossings:
        dg = d_g(c) if callable(d_g) else d_g
        if crossing_ratio(c, dg) > 1.0:
            return TerminationReason("gate_collision", f"gate {c.gate_index} ({c.kind})")

    z_w = float(state.pos[2])
    if z_w > GROUND_Z:
        v_down = float(state.vel[2])
        phi, theta, _ = quat_to_euler(state.quat)
        if v_down > GROUND_V_DOWN:
            return TerminationReason("ground_collision", "descending fast near ground")
        if abs(phi) > GROUND_TILT or abs(theta) > GROUND_TILT:
            return TerminationReason("ground_collision", "tilted near ground")
    return NO_TERMINATION


def step_reward(p_prev_rel, p_curr_rel, in_tunnel: bool, state: DroneState,
                crossings, d_g, f_c: float) -> tuple[RewardBreakdown, TerminationReason]:
    """Full reward and termination for one control step.

    Clean crossings sum their gate rewards; a terminating step zeroes the
    whole breakdown (final reward of zero).
    """
    reason = check_termination(state, crossings, d_g)
    if reason.terminated:
        return RewardBreakdown.zero(), reason

    r_prog = progress_reward(p_prev_rel, p_curr_rel, in_tunnel)
    r_rate = rate_penalty(state.rates, f_c)
    r_gate = 0.0
    for c in crossings:
        dg = d_g(c) if callable(d_g) else d_g
        r_gate += gate_reward(c, dg)
    total = PROGRESS_WEIGHT * r_prog - r_rate + GATE_WEIGHT * r_gate
    return RewardBreakdown(r_prog, r_rate, r_gate, total), reason
