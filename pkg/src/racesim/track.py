"""Gate geometry, gate-local frames, virtual gates and plane-crossing detection.

Gates are upright (roll = pitch = 0); a single yaw angle orients each gate.
The gate frame sits at the gate center with x along the gate normal, so x_g is
the signed distance along the approach direction: negative before the gate,
positive after. Each main gate owns a pre/post pair of invisible virtual gates
displaced by half the tunnel thickness along the normal; together they act as
reward checkpoints and collision volumes.

Track file format (one directive per line, '#' starts a comment):

    t_g <thickness_m>
    gate <x> <y> <z> <yaw_deg> <d_g|default> <inner_m> <outer_m> <0|1>

Gates are listed in pass order; laps wrap cyclically. `d_g default` defers the
effective half-extent to the episode's randomization profile. Positions are
NED (z negative above ground), yaw in degrees.
"""

import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .quat import rot_z, wrap_angle


class TrackError(Exception):
    """Raised for malformed track files, with file/line/field context."""


@dataclass(frozen=True)
class GateSpec:
    center: np.ndarray        # (3,) world NED, m
    yaw: float                # rad
    d_g: float | None         # effective half-extent, m; None = episode default
    inner_size: float         # rendered inner opening (full width), m
    outer_size: float         # rendered outer extent (full width), m
    visible: bool = True

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.d_g is not None and self.d_g <= 0.0:
            raise ValueError("d_g must be positive")
        if self.visible and not self.outer_size > self.inner_size > 0.0:
            raise ValueError("visible gates need outer_size > inner_size > 0")

    @property
    def normal(self) -> np.ndarray:
        """Unit gate normal (approach direction) in world frame."""
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])

    @cached_property
    def rotation(self) -> np.ndarray:
        """World <- gate-frame rotation (yaw only)."""
        return rot_z(self.yaw)


@dataclass(frozen=True)
class GateCrossing:
    """A forward crossing of one gate plane within one control step."""

    gate_index: int
    y_g: float            # lateral offset at the plane, m
    z_g: float            # vertical offset at the plane, m
    kind: str             # "pre" | "main" | "post"
    frac: float = 0.0     # interpolation fraction within the step, [0, 1)


@dataclass
class Track:
    gates: list[GateSpec]
    t_g: float            # tunnel thickness spanned by the pre/post pair, m

    def __post_init__(self):
        if len(self.gates) < 2:
            raise ValueError("a track needs at least 2 gates")
        if self.t_g < 0.0:
            raise ValueError("t_g must be nonnegative")

    def __len__(self) -> int:
        return len(self.gates)

    def gate(self, i: int) -> GateSpec:
        """Gate by cyclic index (laps wrap)."""
        return self.gates[i % len(self.gates)]


def world_to_gate(p_w, gate: GateSpec) -> np.ndarray:
    """Express a world position in the gate frame (yaw-only rotation)."""
    return gate.rotation.T @ (np.asarray(p_w, dtype=float) - gate.center)


def gate_to_world(p_g, gate: GateSpec) -> np.ndarray:
    """Inverse of world_to_gate."""
    return gate.rotation @ np.asarray(p_g, dtype=float) + gate.center


def gate_frame_velocity(v_w, gate: GateSpec) -> np.ndarray:
    """Rotate a world velocity into the gate frame (no translation)."""
    return gate.rotation.T @ np.asarray(v_w, dtype=float)


def gate_frame_yaw(psi_w: float, gate: GateSpec) -> float:
    """Drone yaw expressed relative to the gate normal, wrapped to (-pi, pi]."""
    return wrap_angle(psi_w - gate.yaw)


def detect_crossing(p_prev_g, p_curr_g, gate_index: int = 0,
                    kind: str = "main") -> GateCrossing | None:
    """Forward plane crossing between two gate-frame positions, or None.

    Fires iff x_prev < 0 <= x_curr; the lateral/vertical offsets are linearly
    interpolated onto the plane. At most one crossing per step per gate.
    """
    p_prev_g = np.asarray(p_prev_g, dtype=float)
    p_curr_g = np.asarray(p_curr_g, dtype=float)
    x0, x1 = float(p_prev_g[0]), float(p_curr_g[0])
    if not (x0 < 0.0 <= x1):
        return None
    frac = -x0 / (x1 - x0)
    y = float(p_prev_g[1] + frac * (p_curr_g[1] - p_prev_g[1]))
    z = float(p_prev_g[2] + frac * (p_curr_g[2] - p_prev_g[2]))
    return GateCrossing(gate_index=gate_index, y_g=y, z_g=z, kind=kind, frac=frac)


def virtual_gates(gate: GateSpec, t_g: float) -> tuple[GateSpec, GateSpec]:
    """Invisible pre/post gates at -t_g/2 and +t_g/2 along the gate normal.

    Both keep the main gate's d_g and yaw exactly.
    """
    if t_g < 0.0:
        raise ValueError("t_g must be nonnegative")
    offset = 0.5 * t_g * gate.normal
    pre = replace(gate, center=gate.center - offset, visible=False)
    post = replace(gate, center=gate.center + offset, visible=False)
    return pre, post


def _parse_number(token: str, path: str, lineno: int, field: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise TrackError(f"{path}:{lineno}: field '{field}' expected a number, got {token!r}") from None


def parse_track(text: str, path: str = "<string>") -> Track:
    """Parse the track file format; errors carry line and field names."""
    t_g: float | None = None
    gates: list[GateSpec] = []
    gate_fields = ("x", "y", "z", "yaw", "d_g", "inner", "outer", "visible")

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        directive = tokens[0].lower()
        if directive == "t_g":
            if len(tokens) != 2:
                raise TrackError(f"{path}:{lineno}: t_g takes exactly one value")
            t_g = _parse_number(tokens[1], path, lineno, "t_g")
        elif directive == "gate":
            if len(tokens) != 1 + len(gate_fields):
                raise TrackError(
                    f"{path}:{lineno}: gate takes {len(gate_fields)} fields "
                    f"({' '.join(gate_fields)}), got {len(tokens) - 1}"
                )
            vals = tokens[1:]
            x = _parse_number(vals[0], path, lineno, "x")
            y = _parse_number(vals[1], path, lineno, "y")
            z = _parse_number(vals[2], path, lineno, "z")
            yaw = wrap_angle(math.radians(_parse_number(vals[3], path, lineno, "yaw")))
            if vals[4].lower() == "default":
                d_g = None
            else:
                d_g = _parse_number(vals[4], path, lineno, "d_g")
            inner = _parse_number(vals[5], path, lineno, "inner")
            outer = _parse_number(vals[6], path, lineno, "outer")
            if vals[7] in ("0", "1"):
                visible = vals[7] == "1"
            else:
                raise TrackError(f"{path}:{lineno}: field 'visible' expects 0 or 1, got {vals[7]!r}")
            try:
                gates.append(GateSpec(np.array([x, y, z]), yaw, d_g, inner, outer, visible))
            except ValueError as exc:
                raise TrackError(f"{path}:{lineno}: {exc}") from None
        else:
            raise TrackError(f"{path}:{lineno}: unknown directive {tokens[0]!r}")

    if t_g is None:
        raise TrackError(f"{path}: missing t_g directive")
    if len(gates) < 2:
        raise TrackError(f"{path}: a track needs at least 2 gates, found {len(gates)}")
    return Track(gates=gates, t_g=t_g)


def load_track(path) -> Track:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TrackError(f"cannot read track file {path}: {exc}") from exc
    return parse_track(text, str(path))
