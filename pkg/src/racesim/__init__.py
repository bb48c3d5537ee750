"""Deterministic quadcopter drone-racing simulation environment.

A library for training and evaluating vision-based racing policies: full
nonlinear motor/airframe dynamics integrated with RK4, gate tracks with
virtual pre/post checkpoints, progress/rate/gate rewards with collision
termination, geometric gate-mask rendering with rolling-shutter and erosion
augmentations, domain randomization, actuation/image delays and binary replay
logging. See README.md for the file formats and the CLI.
"""

from .camera import (CameraExtrinsics, CameraIntrinsics, body_rates_to_camera,
                     erode_mask, nominal_intrinsics, project, render_mask,
                     rolling_shutter_warp, write_pgm)
from .config import ConfigError, EnvConfig, load_config
from .dynamics import (GRAVITY, DisturbanceSample, DroneState, DynamicsParams,
                       clamp_action, command_for_speed, compute_angular_accel,
                       compute_specific_force, hover_command, hover_speed,
                       hover_state, hover_trim, max_specific_thrust,
                       motor_steady_speed, rk4_step, state_derivative)
from .env import (BatchedEnv, EnvUsageError, Observation, PrivilegedObservation,
                  RaceEnv, StepResult, smoothness_metric)
from .flightplan import (DEPLOY_THRESHOLD, FLIGHT_PLAN_DIM, FlightPlanTracker,
                         flight_plan_vector)
from .randomization import (DisturbanceState, EpisodeDraw, RandomizationConfig,
                            RngStreams, sample_episode, update_disturbances,
                            update_erosion)
from .replay import (FORMAT_VERSION, ReplayChecksumError, ReplayError,
                     ReplayRecord, ReplayTruncatedError, ReplayVersionError,
                     read_replay, write_replay)
from .rewards import (RewardBreakdown, TerminationReason, check_termination,
                      gate_reward, progress_reward, rate_penalty, step_reward)
from .track import (GateCrossing, GateSpec, Track, TrackError, detect_crossing,
                    gate_frame_velocity, gate_to_world, load_track, parse_track,
                    virtual_gates, world_to_gate)

__version__ = "0.1.0"
