"""Episode-level domain randomization and within-episode disturbance processes.

Two stock profiles exist, "train" and "eval". Each is a flat set of ranges:
camera mount angles, multiplicative bands on the dynamics parameters (the
motor speed bounds get their own band), disturbance magnitudes, gate tolerance
and tunnel thickness, and initial-state ranges. Slow ("1 Hz") disturbances
resample with probability 1/100 per control step; fast ("90 Hz") disturbances
resample every step. Mask erosion is a coin flip held for an average of 100
steps; the rolling-shutter strength is drawn once per episode.

Randomness comes from counter-based Philox streams keyed by (seed, stream id),
one stream per concern, so adding draws to one consumer never shifts another.
"""

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .camera import CameraExtrinsics
from .dynamics import DisturbanceSample, DroneState, DynamicsParams, PARAM_FIELDS
from .quat import euler_to_quat, wrap_angle
from .track import Track, gate_to_world

_STREAM_IDS = {"episode": 0, "disturbance": 1, "erosion": 2, "shutter": 3,
               "flightplan": 4, "sensor": 5}

# parameters excluded from the multiplicative bands
_MOTOR_BOUND_FIELDS = ("omega_min", "omega_max")
_FIXED_FIELDS = ("r_prop",)


@dataclass
class RngStreams:
    """Named, independent counter-based generators for one environment."""

    episode: np.random.Generator
    disturbance: np.random.Generator
    erosion: np.random.Generator
    shutter: np.random.Generator
    flightplan: np.random.Generator
    sensor: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        gens = {
            name: np.random.Generator(np.random.Philox(key=np.array([seed, sid], dtype=np.uint64)))
            for name, sid in _STREAM_IDS.items()
        }
        return cls(**gens)


@dataclass
class RandomizationConfig:
    """One fully resolved profile of sampling ranges."""

    name: str = "train"
    cam_roll_deg: tuple = (-5.0, 5.0)
    cam_pitch_deg: tuple = (45.0, 55.0)
    cam_yaw_deg: tuple = (-5.0, 5.0)
    motor_bound_band: float = 0.20          # omega_min, omega_max
    param_band: float = 0.30                # remaining dynamics parameters
    eps_a_slow: tuple = (-3.0, 3.0)         # m/s^2, 1 Hz process
    eps_m_slow: tuple = (-3.0, 3.0)         # rad/s^2, 1 Hz process
    eps_m_fast: tuple = (-125.0, 125.0)     # rad/s^2, 90 Hz process
    eps_u_fast: tuple = (-0.2, 0.2)         # per-rotor command, 90 Hz process
    d_g: float = 0.8                        # gate half-extent tolerance, m
    t_g: float | None = 0.8                 # tunnel thickness, m; None = use track
    init_x: tuple = (-4.0, -2.0)            # gate-frame spawn box, m
    init_y: tuple = (-1.0, 1.0)
    init_z: tuple = (0.0, 1.3)
    init_rate: tuple = (-0.1, 0.1)          # rad/s
    init_motor_frac: tuple = (0.25, 0.5)    # fraction of omega_max
    init_attitude: tuple = (-math.pi / 9.0, math.pi / 9.0)  # roll, pitch, gate-frame yaw
    slow_resample_prob: float = 0.01
    erosion_prob: float = 0.5
    erosion_resample_prob: float = 0.01
    shutter_range: tuple = (0.0, 0.02)

    @classmethod
    def train_profile(cls) -> "RandomizationConfig":
        return cls()

    @classmethod
    def eval_profile(cls) -> "RandomizationConfig":
        return cls(
            name="eval",
            param_band=0.20,
            eps_a_slow=(-2.0, 2.0),
            eps_m_slow=(-2.0, 2.0),
            eps_m_fast=(-100.0, 100.0),
            d_g=1.0,
            init_z=(0.7, 1.3),
        )


@dataclass
class DisturbanceState:
    """Current values of the slow and fast disturbance processes."""

    eps_a_slow: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eps_m_slow: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eps_m_fast: np.ndarray = field(default_factory=lambda: np.zeros(3))
    eps_u: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def combined(self) -> DisturbanceSample:
        """Sum the slow and fast moment components for the dynamics."""
        return DisturbanceSample(
            eps_a=self.eps_a_slow.copy(),
            eps_m=self.eps_m_slow + self.eps_m_fast,
            eps_u=self.eps_u.copy(),
        )


@dataclass
class EpisodeDraw:
    """One sampled realization of everything that is fixed per episode."""

    params: DynamicsParams
    extrinsics: CameraExtrinsics
    initial: DroneState
    start_gate: int
    erosion_active: bool
    shutter_s: float
    disturbances: DisturbanceState
    d_g: float
    t_g: float


def sample_params(config: RandomizationConfig, rng: np.random.Generator,
                  base: DynamicsParams | None = None) -> DynamicsParams:
    """Independently scale each base parameter within its band."""
    base = base or DynamicsParams.nominal()
    values = {}
    for name in PARAM_FIELDS:
        nominal = getattr(base, name)
        if name in _FIXED_FIELDS:
            values[name] = nominal
            continue
        band = config.motor_bound_band if name in _MOTOR_BOUND_FIELDS else config.param_band
        values[name] = nominal * rng.uniform(1.0 - band, 1.0 + band)
    return DynamicsParams(**values)


def sample_extrinsics(config: RandomizationConfig, rng: np.random.Generator) -> CameraExtrinsics:
    return CameraExtrinsics(
        roll=math.radians(rng.uniform(*config.cam_roll_deg)),
        pitch=math.radians(rng.uniform(*config.cam_pitch_deg)),
        yaw=math.radians(rng.uniform(*config.cam_yaw_deg)),
    )


def sample_initial_state(config: RandomizationConfig, track: Track, gate_index: int,
                         params: DynamicsParams, rng: np.random.Generator) -> DroneState:
    """Spawn in the start gate's frame: a box behind the gate, level-ish
    attitude, zero velocity, small rates, rotors partially spun up."""
    gate = track.gate(gate_index)
    p_g = np.array([
        rng.uniform(*config.init_x),
        rng.uniform(*config.init_y),
        rng.uniform(*config.init_z),
    ])
    phi = rng.uniform(*config.init_attitude)
    theta = rng.uniform(*config.init_attitude)
    psi_g = rng.uniform(*config.init_attitude)
    rates = rng.uniform(*config.init_rate, size=3)
    motors = rng.uniform(*config.init_motor_frac, size=4) * params.omega_max
    return DroneState(
        pos=gate_to_world(p_g, gate),
        quat=euler_to_quat(phi, theta, wrap_angle(gate.yaw + psi_g)),
        vel=np.zeros(3),
        rates=rates.astype(float),
        motors=motors.astype(float),
    )


def sample_disturbances(config: RandomizationConfig, rng: np.random.Generator) -> DisturbanceState:
    return DisturbanceState(
        eps_a_slow=rng.uniform(*config.eps_a_slow, size=3),
        eps_m_slow=rng.uniform(*config.eps_m_slow, size=3),
        eps_m_fast=rng.uniform(*config.eps_m_fast, size=3),
        eps_u=rng.uniform(*config.eps_u_fast, size=4),
    )


def sample_episode(config: RandomizationConfig, track: Track, streams: RngStreams,
                   gate_index: int = 0,
                   base_params: DynamicsParams | None = None) -> EpisodeDraw:
    """Draw everything an episode fixes up front (draw order is part of the
    determinism contract; do not reorder)."""
    params = sample_params(config, streams.episode, base_params)
    extrinsics = sample_extrinsics(config, streams.episode)
    initial = sample_initial_state(config, track, gate_index, params, streams.episode)
    erosion_active = bool(streams.erosion.random() < config.erosion_prob)
    shutter_s = float(streams.shutter.uniform(*config.shutter_range))
    disturbances = sample_disturbances(config, streams.disturbance)
    return EpisodeDraw(
        params=params,
        extrinsics=extrinsics,
        initial=initial,
        start_gate=gate_index % len(track),
        erosion_active=erosion_active,
        shutter_s=shutter_s,
        disturbances=disturbances,
        d_g=config.d_g,
        t_g=config.t_g if config.t_g is not None else track.t_g,
    )


def deterministic_draw(config: RandomizationConfig, track: Track, gate_index: int = 0,
                       base_params: DynamicsParams | None = None) -> EpisodeDraw:
    """Midpoint draw with randomization switched off: nominal parameters,
    camera at the pitch-range center, deterministic spawn, no augmentations."""
    params = base_params or DynamicsParams.nominal()
    gate = track.gate(gate_index)
    p_g = np.array([
        0.5 * (config.init_x[0] + config.init_x[1]),
        0.5 * (config.init_y[0] + config.init_y[1]),
        0.5 * (config.init_z[0] + config.init_z[1]),
    ])
    initial = DroneState(
        pos=gate_to_world(p_g, gate),
        quat=euler_to_quat(0.0, 0.0, gate.yaw),
        vel=np.zeros(3),
        rates=np.zeros(3),
        motors=np.full(4, 0.375 * params.omega_max),
    )
    return EpisodeDraw(
        params=replace(params),
        extrinsics=CameraExtrinsics(0.0, math.radians(0.5 * sum(config.cam_pitch_deg)), 0.0),
        initial=initial,
        start_gate=gate_index % len(track),
        erosion_active=False,
        shutter_s=0.0,
        disturbances=DisturbanceState(),
        d_g=config.d_g,
        t_g=config.t_g if config.t_g is not None else track.t_g,
    )


def update_disturbances(state: DisturbanceState, config: RandomizationConfig,
                        rng: np.random.Generator) -> DisturbanceState:
    """Advance the disturbance processes by one control step.

    Each slow vector resamples as a whole with probability slow_resample_prob;
    the fast vectors resample every call.
    """
    eps_a = state.eps_a_slow
    if rng.random() < config.slow_resample_prob:
        eps_a = rng.uniform(*config.eps_a_slow, size=3)
    eps_m = state.eps_m_slow
    if rng.random() < config.slow_resample_prob:
        eps_m = rng.uniform(*config.eps_m_slow, size=3)
    return DisturbanceState(
        eps_a_slow=np.asarray(eps_a, dtype=float),
        eps_m_slow=np.asarray(eps_m, dtype=float),
        eps_m_fast=rng.uniform(*config.eps_m_fast, size=3),
        eps_u=rng.uniform(*config.eps_u_fast, size=4),
    )


def update_erosion(active: bool, config: RandomizationConfig, rng: np.random.Generator) -> bool:
    """Refresh the erosion coin with probability erosion_resample_prob."""
    if rng.random() < config.erosion_resample_prob:
        return bool(rng.random() < config.erosion_prob)
    return active


def config_overrides(config: RandomizationConfig, overrides: dict) -> RandomizationConfig:
    """Apply a flat dict of field overrides, rejecting unknown keys."""
    valid = {f.name for f in fields(RandomizationConfig)}
    unknown = set(overrides) - valid
    if unknown:
        raise ValueError(f"unknown randomization fields: {sorted(unknown)}")
    coerced = {}
    for key, value in overrides.items():
        coerced[key] = tuple(value) if isinstance(value, list) else value
    return replace(config, **coerced)
