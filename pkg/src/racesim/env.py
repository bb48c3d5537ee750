"""Episode orchestration: stepping, delays, observations, logging, batching.

One control step runs at 90 Hz and advances the physics by five RK4 substeps
under a single held action and disturbance draw. Actions take effect after a
configurable whole-step delay; the rendered mask shows the pose from a
configurable number of steps ago (queues are primed with the initial action
and frame at reset). Sensor readings (body rates, rotor speeds) are current.

The observation never contains ground truth: it is the (delayed, augmented)
gate mask, the measured rates and rotor speeds, and the flight-plan vector.
Ground truth is exposed separately and only when the environment is
constructed with `privileged=True`; replay logs always include it, since logs
exist to support training.
"""

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .camera import (CameraExtrinsics, body_rates_to_camera, erode_mask,
                     nominal_intrinsics, render_mask, rolling_shutter_warp)
from .config import EnvConfig
from .dynamics import (DisturbanceSample, DroneState, DynamicsParams, clamp_action,
                       compute_specific_force, motor_steady_speed, _rk4_vec)
from .flightplan import FlightPlanTracker
from .quat import quat_rotate_inverse, quat_to_euler
from .randomization import (EpisodeDraw, RngStreams, deterministic_draw,
                            sample_episode, update_disturbances, update_erosion)
from .replay import ReplayRecord, ReplayWriter
from .rewards import RewardBreakdown, TerminationReason, NO_TERMINATION, step_reward
from .track import (GateCrossing, Track, detect_crossing, gate_frame_velocity,
                    gate_frame_yaw, load_track, virtual_gates, world_to_gate)

SMOOTHNESS_WEIGHT = 0.002


class EnvUsageError(Exception):
    """Stepping a finished environment or similar caller mistakes."""


@dataclass
class Observation:
    """What the policy sees at execution time."""

    mask: np.ndarray          # (H, W) uint8 in {0, 1}, delayed and augmented
    rates_meas: np.ndarray    # (3,) measured body rates, rad/s
    motors_meas: np.ndarray   # (4,) measured rotor speeds, rad/s
    flight_plan: np.ndarray   # (24,)


@dataclass
class PrivilegedObservation:
    """Ground truth available only during training."""

    pos_w: np.ndarray         # (3,)
    pos_g: np.ndarray         # (3,) in the current target gate frame
    vel_w: np.ndarray         # (3,)
    vel_g: np.ndarray         # (3,)
    euler: np.ndarray         # (4,) roll, pitch, world yaw, gate-frame yaw
    rates: np.ndarray         # (3,) true body rates
    motors: np.ndarray        # (4,) true rotor speeds
    cam_mount: np.ndarray     # (3,) camera mount roll, pitch, yaw
    params_vec: np.ndarray    # (32,) dynamics parameter vector

    def as_vector(self) -> np.ndarray:
        return np.concatenate([
            self.pos_w, self.pos_g, self.vel_w, self.vel_g, self.euler,
            self.rates, self.motors, self.cam_mount, self.params_vec,
        ])


@dataclass
class StepResult:
    obs: Observation
    priv: PrivilegedObservation | None
    reward: RewardBreakdown
    terminated: bool
    truncated: bool
    reason: TerminationReason
    info: dict


def smoothness_metric(trace, weight: float = SMOOTHNESS_WEIGHT) -> float:
    """Mean squared successive difference of an action/mean trace, weighted.

    Regularization diagnostic for policies driving this environment; applied
    to the policy mean only, never to sampled actions.
    """
    trace = np.asarray(trace, dtype=float)
    if trace.ndim == 1:
        trace = trace[:, None]
    if trace.shape[0] < 2:
        raise ValueError("trace must contain at least 2 entries")
    diffs = np.diff(trace, axis=0)
    return weight * float(np.mean(np.sum(diffs * diffs, axis=1)))


class RaceEnv:
    """Single drone-racing episode simulator.

    Single-owner: one logical thread of control at a time. All randomness is
    derived from the seed through named counter-based streams, so a (seed,
    action sequence) pair fully determines the episode byte stream.
    """

    def __init__(self, config: EnvConfig | None = None, track: Track | None = None):
        self.config = config or EnvConfig()
        if track is None:
            if self.config.track_path is None:
                raise ValueError("need a track: set track_path in the config or pass one")
            track = load_track(self.config.track_path)
        self.track = track
        self.intrinsics = nominal_intrinsics(self.config.image_width, self.config.image_height)
        self._streams = RngStreams.from_seed(self.config.seed)
        self._writer: ReplayWriter | None = None
        self._omega_max_schedule = None
        self._done = True
        self._draw: EpisodeDraw | None = None

    # -- episode control ----------------------------------------------------

    def reset(self, seed: int | None = None, *, initial_state: DroneState | None = None,
              initial_action=None):
        """Start a new episode; returns (observation, privileged or None).

        Passing a seed rebuilds all random streams (two resets with the same
        seed are bit-identical). `initial_state`/`initial_action` override the
        sampled spawn and the action the delay queue is primed with; scripted
        scenarios use them to start at exact operating points.
        """
        cfg = self.config
        if seed is not None:
            self._streams = RngStreams.from_seed(seed)

        draw = self._draw_episode()
        if initial_state is not None:
            draw.initial = initial_state.copy()
        self._draw = draw
        self._params = replace(draw.params)  # schedule hook may mutate per step
        self._column = self._draw_column
        self._state = draw.initial.copy()
        self._dist_state = draw.disturbances
        self._erosion = draw.erosion_active
        self._step_index = 0
        self._done = False
        self._lap = 0
        self._target = draw.start_gate
        self._in_tunnel = False
        self._refresh_target_gates()
        fp_mode = "train" if cfg.mode == "train" else "deploy"
        self._fp = FlightPlanTracker(
            self.track, draw.start_gate, mode=fp_mode, rng=self._streams.flightplan,
            diff_from_previous=cfg.flightplan_diff_from_previous,
            deploy_threshold=cfg.deploy_threshold,
        )

        primed = clamp_action(initial_action) if initial_action is not None else np.zeros(4)
        self._action_queue = deque(primed.copy() for _ in range(cfg.action_delay_steps))
        pose0 = (self._state.pos.copy(), self._state.quat.copy(), self._state.rates.copy())
        self._pose_queue = deque(pose0 for _ in range(cfg.image_delay_steps))
        self._primed_action = primed

        obs = self._assemble_observation(pose0)
        priv = self._privileged()
        if cfg.replay_path is not None:
            if self._writer is None:
                self._writer = ReplayWriter(cfg.replay_path, cfg.image_height, cfg.image_width)
            self._log(obs, priv, primed, RewardBreakdown.zero(), False, False,
                      NO_TERMINATION, [], False)
        return obs, (priv if cfg.privileged else None)

    def step(self, action) -> StepResult:
        """Advance one control step under the given normalized motor commands."""
        if self._done:
            raise EnvUsageError("episode is over; call reset() before stepping")
        cfg = self.config
        u = clamp_action(action)
        self._step_index += 1

        # action delay: apply the command from action_delay_steps ago
        self._action_queue.append(u)
        u_applied = self._action_queue.popleft()

        if self._omega_max_schedule is not None:
            self._params.omega_max = float(self._omega_max_schedule(self._step_index))

        if cfg.disturbances and cfg.randomization_enabled:
            self._dist_state = update_disturbances(self._dist_state, self._column,
                                                   self._streams.disturbance)
            dist = self._dist_state.combined()
        else:
            dist = DisturbanceSample.zero()
        if cfg.randomization_enabled:
            self._erosion = update_erosion(self._erosion, self._column, self._streams.erosion)

        prev = self._state
        self._state = self._advance_physics(prev, u_applied, dist)
        state = self._state

        # plane crossings of the current target gate (checked once per step)
        gate, pre, post = self._target_gates
        gidx = self._target % len(self.track)
        crossings: list[GateCrossing] = []
        for kind, g in (("pre", pre), ("main", gate), ("post", post)):
            c = detect_crossing(world_to_gate(prev.pos, g), world_to_gate(state.pos, g),
                                gate_index=gidx, kind=kind)
            if c is not None:
                crossings.append(c)
        crossings.sort(key=lambda c: c.frac)

        d_g_eff = gate.d_g if gate.d_g is not None else self._draw.d_g
        breakdown, reason = step_reward(
            prev.pos - pre.center, state.pos - pre.center, self._in_tunnel,
            state, crossings, d_g_eff, cfg.control_hz,
        )
        terminated = reason.terminated

        fp_changed = False
        if not terminated:
            if self._fp.mode == "train":
                for c in crossings:
                    if c.kind == "pre" and self._fp.index == gidx:
                        self._fp.arm_random_increment(self._draw.t_g)
            x_fp = float(world_to_gate(state.pos, self.track.gate(self._fp.index))[0])
            fp_changed = self._fp.update(x_fp)
            for c in crossings:
                if c.kind == "pre":
                    self._in_tunnel = True
                elif c.kind == "post":
                    self._target += 1
                    self._in_tunnel = False
                    self._lap = (self._target - self._draw.start_gate) // len(self.track)
                    self._refresh_target_gates()

        truncated = (not terminated) and self._step_index >= cfg.max_episode_steps
        self._done = terminated or truncated

        self._pose_queue.append((state.pos.copy(), state.quat.copy(), state.rates.copy()))
        render_pose = self._pose_queue.popleft()
        obs = self._assemble_observation(render_pose)
        priv = (self._privileged()
                if (cfg.privileged or self._writer is not None) else None)

        info = {
            "crossings": crossings,
            "lap": self._lap,
            "step": self._step_index,
            "fp_index": self._fp.index,
            "fp_changed": fp_changed,
            "applied_action": u_applied,
        }
        if self._writer is not None:
            self._log(obs, priv, u, breakdown, terminated, truncated, reason,
                      crossings, fp_changed)
        return StepResult(obs, (priv if cfg.privileged else None), breakdown,
                          terminated, truncated, reason, info)

    def close(self) -> None:
        if self._writer is not None:
            self._writer.close()
            self._writer = None

    # -- scripted-scenario hooks ---------------------------------------------

    def set_omega_max_schedule(self, schedule) -> None:
        """Install a per-step rotor speed ceiling, e.g. to script battery
        depletion; `schedule(step_index) -> omega_max`. None clears it."""
        self._omega_max_schedule = schedule

    @property
    def done(self) -> bool:
        return self._done

    @property
    def draw(self) -> EpisodeDraw | None:
        return self._draw

    @property
    def state(self) -> DroneState:
        return self._state

    @property
    def params(self) -> DynamicsParams:
        return self._params

    def specific_force(self, state: DroneState | None = None) -> np.ndarray:
        """Body-frame specific force at a state under the current parameters."""
        state = state or self._state
        v_body = quat_rotate_inverse(state.quat, state.vel)
        return compute_specific_force(v_body, state.motors, self._params)

    # -- internals ------------------------------------------------------------

    def _refresh_target_gates(self) -> None:
        gate = self.track.gate(self._target)
        pre, post = virtual_gates(gate, self._draw.t_g)
        self._target_gates = (gate, pre, post)

    def _draw_episode(self) -> EpisodeDraw:
        cfg = self.config
        if not cfg.randomization_enabled:
            self._draw_column = cfg.rand_eval if cfg.mode == "eval" else cfg.rand_train
            return deterministic_draw(self._draw_column, self.track, 0, cfg.base_params)
        if cfg.mode == "eval":
            column, gate = cfg.rand_eval, 0
        else:
            if self._streams.episode.random() < cfg.train_column_prob:
                column = cfg.rand_train
                gate = int(self._streams.episode.integers(len(self.track)))
            else:
                column, gate = cfg.rand_eval, 0
        self._draw_column = column
        return sample_episode(column, self.track, self._streams, gate, cfg.base_params)

    def _advance_physics(self, state: DroneState, u_applied, dist: DisturbanceSample) -> DroneState:
        cfg = self.config
        wc = tuple(motor_steady_speed(u_applied[i], dist.eps_u[i], self._params)
                   for i in range(4))
        y = tuple(state.as_vector())
        eps_a = tuple(float(v) for v in dist.eps_a)
        eps_m = tuple(float(v) for v in dist.eps_m)
        pk = self._params.packed()
        dt = cfg.substep_dt
        for _ in range(cfg.substeps):
            y = _rk4_vec(y, wc, eps_a, eps_m, pk, dt)
        return DroneState.from_vector(y)

    def _assemble_observation(self, render_pose) -> Observation:
        cfg = self.config
        pos, quat, rates = render_pose
        if cfg.render_masks:
            mask = render_mask(pos, quat, self._draw.extrinsics, self.intrinsics, self.track)
            if self._erosion:
                mask = erode_mask(mask)
            if self._draw.shutter_s != 0.0:
                cam_rates = body_rates_to_camera(rates, self._draw.extrinsics)
                mask = rolling_shutter_warp(mask, self._draw.shutter_s,
                                            float(cam_rates[1]), float(cam_rates[2]))
        else:
            mask = np.zeros((cfg.image_height, cfg.image_width), dtype=np.uint8)
        rates_meas = self._state.rates.copy()
        motors_meas = self._state.motors.copy()
        if cfg.rate_noise > 0.0:
            rates_meas = rates_meas + self._streams.sensor.uniform(
                -cfg.rate_noise, cfg.rate_noise, size=3)
        if cfg.motor_noise > 0.0:
            motors_meas = motors_meas + self._streams.sensor.uniform(
                -cfg.motor_noise, cfg.motor_noise, size=4)
        return Observation(mask, rates_meas, motors_meas, self._fp.vector.copy())

    def _privileged(self) -> PrivilegedObservation:
        state = self._state
        fp_gate = self.track.gate(self._fp.index)
        phi, theta, psi = quat_to_euler(state.quat)
        return PrivilegedObservation(
            pos_w=state.pos.copy(),
            pos_g=world_to_gate(state.pos, fp_gate),
            vel_w=state.vel.copy(),
            vel_g=gate_frame_velocity(state.vel, fp_gate),
            euler=np.array([phi, theta, psi, gate_frame_yaw(psi, fp_gate)]),
            rates=state.rates.copy(),
            motors=state.motors.copy(),
            cam_mount=np.array([self._draw.extrinsics.roll, self._draw.extrinsics.pitch,
                                self._draw.extrinsics.yaw]),
            params_vec=self._params.as_vector(),
        )

    def _log(self, obs, priv, action, breakdown, terminated, truncated, reason,
             crossings, fp_changed) -> None:
        self._writer.append(ReplayRecord(
            step_index=self._step_index,
            terminated=terminated,
            truncated=truncated,
            term_kind=reason.kind,
            term_detail=reason.detail,
            crossings=list(crossings),
            fp_index=self._fp.index,
            fp_changed=fp_changed,
            lap=self._lap,
            r_prog=breakdown.r_prog, r_rate=breakdown.r_rate,
            r_gate=breakdown.r_gate, r_total=breakdown.total,
            action=np.asarray(action, dtype=float),
            rates_meas=obs.rates_meas, motors_meas=obs.motors_meas,
            flight_plan=obs.flight_plan,
            mask=obs.mask,
            priv=priv.as_vector(),
        ))


class BatchedEnv:
    """A batch of independent environments stepped together.

    Each member gets the shared config with seed + index; results are
    bit-identical to stepping the members sequentially (same code path), a
    worker pool only distributes the calls.
    """

    def __init__(self, config: EnvConfig, batch_size: int, track: Track | None = None,
                 workers: int = 1):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        base = replace(config, replay_path=None)
        if track is None:
            if base.track_path is None:
                raise ValueError("need a track: set track_path in the config or pass one")
            track = load_track(base.track_path)
        self.envs = [RaceEnv(replace(base, seed=base.seed + i), track)
                     for i in range(batch_size)]
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def __len__(self) -> int:
        return len(self.envs)

    def reset_all(self):
        return [env.reset() for env in self.envs]

    def step(self, actions) -> list[StepResult]:
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (len(self.envs), 4):
            raise ValueError(f"expected actions of shape ({len(self.envs)}, 4), got {actions.shape}")
        if self._pool is None:
            return [env.step(a) for env, a in zip(self.envs, actions)]
        return list(self._pool.map(lambda pair: pair[0].step(pair[1]),
                                   zip(self.envs, actions)))

    def close(self) -> None:
        for env in self.envs:
            env.close()
        if self._pool is not None:
            self._pool.shutdown()
