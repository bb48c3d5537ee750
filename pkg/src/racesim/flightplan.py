"""Flight-plan vector and gate-progress index tracking.

The flight plan is a 24-vector describing the next three gates and carries no
drone state: three (delta position, delta yaw) blocks between consecutive
gates followed by three (absolute position, absolute yaw) blocks, all in the
world frame. Yaw differences are wrapped to (-pi, pi].

The index advances once per gate. At deployment the rule compares the
(estimated) gate-frame x position against a fixed threshold slightly before
the gate plane; during training the increment point is instead drawn uniformly
inside the tunnel when the pre-gate is crossed, so the policy never learns to
rely on a precise switching instant.
"""

from dataclasses import dataclass

import numpy as np

from .quat import wrap_angle
from .track import Track

FLIGHT_PLAN_DIM = 24
DEPLOY_THRESHOLD = -0.15  # m, gate-frame x


def flight_plan_vector(track: Track, index: int, diff_from_previous: bool = True) -> np.ndarray:
    """24-vector for target gate `index` (cyclic).

    diff_from_previous=True starts the difference blocks at (gate i) - (gate
    i-1); False starts them at (gate i+1) - (gate i).
    """
    out = np.empty(FLIGHT_PLAN_DIM)
    pos = 0
    for k in range(3):
        hi = index + k + (0 if diff_from_previous else 1)
        a = track.gate(hi)
        b = track.gate(hi - 1)
        out[pos:pos + 3] = a.center - b.center
        out[pos + 3] = wrap_angle(a.yaw - b.yaw)
        pos += 4
    for k in range(3):
        g = track.gate(index + k)
        out[pos:pos + 3] = g.center
        out[pos + 3] = g.yaw
        pos += 4
    return out


@dataclass
class FlightPlanState:
    index: int
    vector: np.ndarray


class FlightPlanTracker:
    """Owns the flight-plan index, its vector, and the increment rule."""

    def __init__(self, track: Track, start_index: int = 0, mode: str = "deploy",
                 rng: np.random.Generator | None = None,
                 diff_from_previous: bool = True,
                 deploy_threshold: float = DEPLOY_THRESHOLD):
        if mode not in ("train", "deploy"):
            raise ValueError(f"mode must be 'train' or 'deploy', got {mode!r}")
        self._track = track
        self._mode = mode
        self._rng = rng
        self._diff_from_previous = diff_from_previous
        self._deploy_threshold = deploy_threshold
        self._armed_threshold: float | None = None
        self.reset(start_index)

    def reset(self, start_index: int) -> None:
        self._index = start_index % len(self._track)
        self._vector = flight_plan_vector(self._track, self._index, self._diff_from_previous)
        self._armed_threshold = None

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def index(self) -> int:
        return self._index

    @property
    def vector(self) -> np.ndarray:
        return self._vector

    @property
    def state(self) -> FlightPlanState:
        return FlightPlanState(self._index, self._vector.copy())

    def arm_random_increment(self, t_g: float) -> float:
        """Draw the train-mode increment point for the upcoming tunnel pass.

        Called when the pre-gate of the current target is crossed; the point
        is uniform over the tunnel interval [-t_g/2, +t_g/2].
        """
        if self._rng is None:
            raise ValueError("train-mode increments need an rng")
        self._armed_threshold = float(self._rng.uniform(-0.5 * t_g, 0.5 * t_g))
        return self._armed_threshold

    def update(self, x_g: float) -> bool:
        """Advance the index (at most once) given the gate-frame x position
        relative to the current target gate. Returns True on increment."""
        x_g = float(x_g)
        if self._mode == "deploy":
            fire = x_g > self._deploy_threshold
        else:
            fire = self._armed_threshold is not None and x_g > self._armed_threshold
        if not fire:
            return False
        self._index = (self._index + 1) % len(self._track)
        self._vector = flight_plan_vector(self._track, self._index, self._diff_from_previous)
        self._armed_threshold = None
        return True
