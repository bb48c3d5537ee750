"""Continuous-time quadcopter model and its RK4 discretization.

State layout (17 floats; see DroneState):
  y[ 0: 3] = p_w   position, world NED frame          (m)
  y[ 3: 7] = q     attitude quaternion (w, x, y, z), body->world
  y[ 7:10] = v_w   velocity, world frame              (m/s)
  y[10:13] = Omega body rates p, q, r                 (rad/s)
  y[13:17] = omega rotor angular speeds               (rad/s)

The model is a specific-force formulation: the force output has units of
acceleration (mass is absorbed into the coefficients), and the moment output
directly gives body angular acceleration. Rotors follow a first-order lag
toward a steady-state speed set by the normalized command through a square-root
blend curve. NED means z points down, so gravity is +9.81 on the z axis and
thrust is negative z in the body frame.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from .quat import quat_mul_f, rot_matrix_f

GRAVITY = 9.81

# Serialization order of the parameter vector (randomizable part first,
# rotor radius last; the radius is a geometry constant, never randomized).
PARAM_FIELDS = (
    "k_w", "k_x", "k_y", "k_x2", "k_y2", "k_angle", "k_hor", "k_v2",
    "j_x", "j_y", "j_z", "omega_min", "omega_max", "k", "tau",
    "k_p1", "k_p2", "k_p3", "k_p4",
    "k_q1", "k_q2", "k_q3", "k_q4",
    "k_r1", "k_r2", "k_r3", "k_r4", "k_r5", "k_r6", "k_r7", "k_r8",
    "r_prop",
)


@dataclass
class DynamicsParams:
    """Aerodynamic, thrust, motor and moment coefficients of one airframe."""

    k_w: float = 1.55e-6        # rotor thrust effectiveness (specific force / (rad/s)^2)
    k_x: float = 5.37e-5        # linear body-x drag, scaled by total rotor speed
    k_y: float = 5.37e-5
    k_x2: float = 4.10e-3       # quadratic body-x drag
    k_y2: float = 1.51e-2
    k_angle: float = 3.145      # thrust change with inflow angle
    k_hor: float = 7.245        # thrust change with horizontal inflow
    k_v2: float = 0.0           # quadratic vertical drag (inert at nominal)
    j_x: float = -0.89          # gyroscopic coupling coefficients
    j_y: float = 0.96
    j_z: float = -0.34
    omega_min: float = 341.75   # rotor speed at zero command (rad/s)
    omega_max: float = 3100.0   # rotor speed at full command (rad/s)
    k: float = 0.50             # motor curve shape, 0 = sqrt, 1 = linear-in-u^2
    tau: float = 0.03           # motor time constant (s)
    k_p1: float = 4.99e-5       # per-rotor roll moment coefficients
    k_p2: float = 3.78e-5
    k_p3: float = 4.82e-5
    k_p4: float = 3.83e-5
    k_q1: float = 2.05e-5       # per-rotor pitch moment coefficients
    k_q2: float = 2.46e-5
    k_q3: float = 2.02e-5
    k_q4: float = 2.57e-5
    k_r1: float = 3.38e-3       # per-rotor yaw moment coefficients (speed terms)
    k_r2: float = 3.38e-3
    k_r3: float = 3.38e-3
    k_r4: float = 3.38e-3
    k_r5: float = 3.24e-4       # per-rotor yaw moment coefficients (accel terms)
    k_r6: float = 3.24e-4
    k_r7: float = 3.24e-4
    k_r8: float = 3.24e-4
    r_prop: float = 0.0635      # rotor radius (m), used in the inflow angles

    def __post_init__(self):
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be below omega_max")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if not 0.0 <= self.k <= 1.0:
            raise ValueError("motor curve shape k must be in [0, 1]")

    @classmethod
    def nominal(cls) -> "DynamicsParams":
        return cls()

    def with_symmetric_moments(self) -> "DynamicsParams":
        """Copy with each per-rotor moment quadruple replaced by its mean.

        The identified coefficients are rotor-asymmetric, so equal rotor
        speeds carry a net moment and hovering requires per-rotor trim (see
        hover_trim). The symmetrized airframe makes the equal-speed hover an
        exact fixed point, which idealized scenarios rely on.
        """
        from dataclasses import replace

        kp = (self.k_p1 + self.k_p2 + self.k_p3 + self.k_p4) / 4.0
        kq = (self.k_q1 + self.k_q2 + self.k_q3 + self.k_q4) / 4.0
        kr = (self.k_r1 + self.k_r2 + self.k_r3 + self.k_r4) / 4.0
        krd = (self.k_r5 + self.k_r6 + self.k_r7 + self.k_r8) / 4.0
        return replace(
            self,
            k_p1=kp, k_p2=kp, k_p3=kp, k_p4=kp,
            k_q1=kq, k_q2=kq, k_q3=kq, k_q4=kq,
            k_r1=kr, k_r2=kr, k_r3=kr, k_r4=kr,
            k_r5=krd, k_r6=krd, k_r7=krd, k_r8=krd,
        )

    @classmethod
    def field_names(cls):
        return tuple(f.name for f in fields(cls))

    def as_vector(self) -> np.ndarray:
        """Parameter vector in PARAM_FIELDS order."""
        return np.array([getattr(self, name) for name in PARAM_FIELDS])

    @classmethod
    def from_vector(cls, vec) -> "DynamicsParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (len(PARAM_FIELDS),):
            raise ValueError(f"expected {len(PARAM_FIELDS)} parameters, got {vec.shape}")
        return cls(**{name: float(v) for name, v in zip(PARAM_FIELDS, vec)})

    def packed(self):
        """Tuple in PARAM_FIELDS order for the scalar hot path."""
        return tuple(float(getattr(self, name)) for name in PARAM_FIELDS)


@dataclass
class DisturbanceSample:
    """Additive disturbances applied during one control step."""

    eps_a: np.ndarray  # world-frame acceleration offset (3,), m/s^2
    eps_m: np.ndarray  # body angular acceleration offset (3,), rad/s^2
    eps_u: np.ndarray  # per-rotor command offset (4,), dimensionless

    @classmethod
    def zero(cls) -> "DisturbanceSample":
        return cls(np.zeros(3), np.zeros(3), np.zeros(4))


@dataclass
class DroneState:
    """Full continuous simulation state."""

    pos: np.ndarray     # (3,) world NED position, m
    quat: np.ndarray    # (4,) attitude (w, x, y, z), body->world
    vel: np.ndarray     # (3,) world velocity, m/s
    rates: np.ndarray   # (3,) body rates p, q, r, rad/s
    motors: np.ndarray  # (4,) rotor speeds, rad/s

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.pos, self.quat, self.vel, self.rates, self.motors])

    @classmethod
    def from_vector(cls, y) -> "DroneState":
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:7].copy(), y[7:10].copy(), y[10:13].copy(), y[13:17].copy())

    def copy(self) -> "DroneState":
        return DroneState(
            self.pos.copy(), self.quat.copy(), self.vel.copy(),
            self.rates.copy(), self.motors.copy(),
        )


def clamp_action(u) -> np.ndarray:
    """Normalized motor commands, clamped to [0, 1] on ingestion."""
    u = np.asarray(u, dtype=float)
    if u.shape != (4,):
        raise ValueError(f"action must have shape (4,), got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"action contains non-finite values: {u}")
    return np.clip(u, 0.0, 1.0)


def motor_steady_speed(u: float, eps_u: float, params: DynamicsParams) -> float:
    """Steady-state rotor speed for one normalized command.

    The command plus its disturbance is clamped to [0, 1], then mapped through
    a blend of quadratic and linear terms under a square root, spanning
    [omega_min, omega_max]. Total function, monotone nondecreasing in u.
    """
    ut = min(max(float(u) + float(eps_u), 0.0), 1.0)
    k = params.k
    return (params.omega_max - params.omega_min) * math.sqrt(k * ut * ut + (1.0 - k) * ut) + params.omega_min


def motor_steady_speeds(u, eps_u, params: DynamicsParams) -> np.ndarray:
    """Vector version of motor_steady_speed over the four rotors."""
    u = np.asarray(u, dtype=float)
    eps_u = np.asarray(eps_u, dtype=float)
    return np.array([motor_steady_speed(u[i], eps_u[i], params) for i in range(4)])


def compute_specific_force(v_body, omega, params: DynamicsParams) -> np.ndarray:
    """Body-frame specific force (m/s^2) from velocity and rotor speeds.

    x/y components are drag terms (linear in rotor speed sum plus quadratic);
    the z component is rotor thrust corrected for vertical and horizontal
    inflow angles, pointing along -z (up) for all physical inputs.
    """
    vbx, vby, vbz = (float(c) for c in v_body)
    w1, w2, w3, w4 = (float(c) for c in omega)
    wbar = w1 + w2 + w3 + w4
    wsq = w1 * w1 + w2 * w2 + w3 * w3 + w4 * w4
    alpha = math.atan2(vbz, params.r_prop * wbar)
    mu = math.atan2(vbx * vbx + vby * vby, params.r_prop * wbar)
    return np.array(
        [
            -params.k_x * vbx * wbar - params.k_x2 * vbx * abs(vbx),
            -params.k_y * vby * wbar - params.k_y2 * vby * abs(vby),
            -params.k_w * (1.0 + params.k_angle * alpha + params.k_hor * mu) * wsq
            - params.k_v2 * vbz * abs(vbz),
        ]
    )


def compute_angular_accel(omega, omega_dot, rates, params: DynamicsParams) -> np.ndarray:
    """Body angular acceleration (rad/s^2) from rotor speeds and their rates.

    Rotor speed squares drive roll/pitch, rotor speeds and accelerations drive
    yaw, and the gyroscopic terms couple the body rates pairwise.
    """
    w1, w2, w3, w4 = (float(c) for c in omega)
    d1, d2, d3, d4 = (float(c) for c in omega_dot)
    p, q, r = (float(c) for c in rates)
    mx = (-params.k_p1 * w1 * w1 - params.k_p2 * w2 * w2
          + params.k_p3 * w3 * w3 + params.k_p4 * w4 * w4 + params.j_x * q * r)
    my = (-params.k_q1 * w1 * w1 + params.k_q2 * w2 * w2
          - params.k_q3 * w3 * w3 + params.k_q4 * w4 * w4 + params.j_y * p * r)
    mz = (-params.k_r1 * w1 + params.k_r2 * w2 + params.k_r3 * w3 - params.k_r4 * w4
          - params.k_r5 * d1 + params.k_r6 * d2 + params.k_r7 * d3 - params.k_r8 * d4
          + params.j_z * p * q)
    return np.array([mx, my, mz])


def _deriv(y, wc, eps_a, eps_m, pk):
    """Time derivative of the 17-float state. Scalar hot path.

    wc: steady rotor speeds (4 floats), held constant across RK4 stages.
    pk: params.packed(). The rotor acceleration used in the yaw moment is the
    analytic lag derivative at the evaluation point, not a finite difference.
    """
    (k_w, k_x, k_y, k_x2, k_y2, k_angle, k_hor, k_v2,
     j_x, j_y, j_z, _w_min, _w_max, _k, tau,
     k_p1, k_p2, k_p3, k_p4, k_q1, k_q2, k_q3, k_q4,
     k_r1, k_r2, k_r3, k_r4, k_r5, k_r6, k_r7, k_r8, r_prop) = pk

    qw, qx, qy, qz = y[3], y[4], y[5], y[6]
    vx, vy, vz = y[7], y[8], y[9]
    p, q, r = y[10], y[11], y[12]
    w1, w2, w3, w4 = y[13], y[14], y[15], y[16]

    r00, r01, r02, r10, r11, r12, r20, r21, r22 = rot_matrix_f(qw, qx, qy, qz)

    # velocity in body frame: R^T v_w
    vbx = r00 * vx + r10 * vy + r20 * vz
    vby = r01 * vx + r11 * vy + r21 * vz
    vbz = r02 * vx + r12 * vy + r22 * vz

    wbar = w1 + w2 + w3 + w4
    wsq = w1 * w1 + w2 * w2 + w3 * w3 + w4 * w4
    alpha = math.atan2(vbz, r_prop * wbar)
    mu = math.atan2(vbx * vbx + vby * vby, r_prop * wbar)

    fx = -k_x * vbx * wbar - k_x2 * vbx * abs(vbx)
    fy = -k_y * vby * wbar - k_y2 * vby * abs(vby)
    fz = -k_w * (1.0 + k_angle * alpha + k_hor * mu) * wsq - k_v2 * vbz * abs(vbz)

    dw1 = (wc[0] - w1) / tau
    dw2 = (wc[1] - w2) / tau
    dw3 = (wc[2] - w3) / tau
    dw4 = (wc[3] - w4) / tau

    mx = -k_p1 * w1 * w1 - k_p2 * w2 * w2 + k_p3 * w3 * w3 + k_p4 * w4 * w4 + j_x * q * r
    my = -k_q1 * w1 * w1 + k_q2 * w2 * w2 - k_q3 * w3 * w3 + k_q4 * w4 * w4 + j_y * p * r
    mz = (-k_r1 * w1 + k_r2 * w2 + k_r3 * w3 - k_r4 * w4
          - k_r5 * dw1 + k_r6 * dw2 + k_r7 * dw3 - k_r8 * dw4 + j_z * p * q)

    dqw, dqx, dqy, dqz = quat_mul_f(qw, qx, qy, qz, 0.0, p, q, r)

    return (
        vx, vy, vz,
        0.5 * dqw, 0.5 * dqx, 0.5 * dqy, 0.5 * dqz,
        r00 * fx + r01 * fy + r02 * fz + eps_a[0],
        r10 * fx + r11 * fy + r12 * fz + eps_a[1],
        r20 * fx + r21 * fy + r22 * fz + GRAVITY + eps_a[2],
        mx + eps_m[0], my + eps_m[1], mz + eps_m[2],
        dw1, dw2, dw3, dw4,
    )


def state_derivative(state: DroneState, omega_c, dist: DisturbanceSample,
                     params: DynamicsParams) -> DroneState:
    """Time derivatives of all DroneState fields (as a DroneState)."""
    y = tuple(state.as_vector())
    wc = tuple(float(c) for c in omega_c)
    dy = _deriv(y, wc, tuple(dist.eps_a), tuple(dist.eps_m), params.packed())
    return DroneState.from_vector(dy)


def _rk4_vec(y, wc, eps_a, eps_m, pk, dt):
    k1 = _deriv(y, wc, eps_a, eps_m, pk)
    h2 = 0.5 * dt
    y2 = tuple(a + h2 * b for a, b in zip(y, k1))
    k2 = _deriv(y2, wc, eps_a, eps_m, pk)
    y3 = tuple(a + h2 * b for a, b in zip(y, k2))
    k3 = _deriv(y3, wc, eps_a, eps_m, pk)
    y4 = tuple(a + dt * b for a, b in zip(y, k3))
    k4 = _deriv(y4, wc, eps_a, eps_m, pk)
    h6 = dt / 6.0
    out = [a + h6 * (b + 2.0 * (c + d) + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]

    # renormalize the quaternion, keep rotor speeds nonnegative
    qn = math.sqrt(out[3] * out[3] + out[4] * out[4] + out[5] * out[5] + out[6] * out[6])
    out[3] /= qn
    out[4] /= qn
    out[5] /= qn
    out[6] /= qn
    for i in (13, 14, 15, 16):
        if out[i] < 0.0:
            out[i] = 0.0
    return out


def rk4_step(state: DroneState, action, dist: DisturbanceSample,
             params: DynamicsParams, dt: float) -> DroneState:
    """One RK4 step of duration dt under a fixed action and disturbance.

    The steady rotor speeds are computed once from the (clamped) action and
    held across the four stages. The returned quaternion is renormalized to
    unit length and rotor speeds are clamped to >= 0.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    u = clamp_action(action)
    wc = tuple(motor_steady_speed(u[i], dist.eps_u[i], params) for i in range(4))
    y = tuple(state.as_vector())
    out = _rk4_vec(y, wc, tuple(dist.eps_a), tuple(dist.eps_m), params.packed(), dt)
    return DroneState.from_vector(out)


def hover_speed(params: DynamicsParams) -> float:
    """Rotor speed at which four rotors exactly balance gravity at rest."""
    return math.sqrt(GRAVITY / (4.0 * params.k_w))


def command_for_speed(omega: float, params: DynamicsParams) -> float:
    """Normalized command whose steady speed equals omega (inverse motor curve).

    With y = (omega - w_min) / (w_max - w_min), solves k u^2 + (1 - k) u = y^2
    for the root in [0, 1]. omega outside [w_min, w_max] saturates.
    """
    y = (float(omega) - params.omega_min) / (params.omega_max - params.omega_min)
    y = min(max(y, 0.0), 1.0)
    k = params.k
    if k == 0.0:
        return y * y
    disc = (1.0 - k) ** 2 + 4.0 * k * y * y
    return (-(1.0 - k) + math.sqrt(disc)) / (2.0 * k)


def hover_command(params: DynamicsParams) -> float:
    """Normalized command whose steady speed equals hover_speed."""
    return command_for_speed(hover_speed(params), params)


def hover_trim(params: DynamicsParams, tol: float = 1e-12, max_iter: int = 50):
    """Per-rotor speeds and commands that balance gravity and all moments.

    Solves thrust = g and zero roll/pitch/yaw moment at rest for the four
    rotor speeds by Newton iteration from the equal-speed point (needed
    because the per-rotor coefficients are asymmetric). Returns
    (speeds (4,), commands (4,)).
    """
    w = np.full(4, hover_speed(params))
    sp = np.array([-params.k_p1, -params.k_p2, params.k_p3, params.k_p4])
    sq = np.array([-params.k_q1, params.k_q2, -params.k_q3, params.k_q4])
    sr = np.array([-params.k_r1, params.k_r2, params.k_r3, -params.k_r4])
    for _ in range(max_iter):
        w2 = w * w
        resid = np.array([
            params.k_w * w2.sum() - GRAVITY,
            sp @ w2,
            sq @ w2,
            sr @ w,
        ])
        if np.max(np.abs(resid)) < tol:
            break
        jac = np.vstack([
            2.0 * params.k_w * w,
            2.0 * sp * w,
            2.0 * sq * w,
            sr,
        ])
        w = w - np.linalg.solve(jac, resid)
    commands = np.array([command_for_speed(wi, params) for wi in w])
    return w, commands


def max_specific_thrust(params: DynamicsParams) -> float:
    """Specific-force magnitude of four rotors at omega_max, zero velocity."""
    return 4.0 * params.k_w * params.omega_max ** 2


def hover_state(params: DynamicsParams, pos, psi: float = 0.0) -> DroneState:
    """Level equilibrium state at a position: zero velocity, rotors at hover."""
    from .quat import euler_to_quat

    wh = hover_speed(params)
    return DroneState(
        pos=np.asarray(pos, dtype=float).copy(),
        quat=euler_to_quat(0.0, 0.0, psi),
        vel=np.zeros(3),
        rates=np.zeros(3),
        motors=np.full(4, wh),
    )
