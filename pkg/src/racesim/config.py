"""Environment configuration and its YAML file format.

An empty document (or no file at all) reproduces the stock setup: 90 Hz
control split into five RK4 substeps, a 0.997 discount, three steps of image
delay and one step of action delay, full train/eval randomization profiles and
nominal dynamics. Every field can be overridden; unknown keys are errors.
"""

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .dynamics import DynamicsParams
from .randomization import RandomizationConfig, config_overrides


class ConfigError(Exception):
    """Raised for unreadable, unparsable or unknown-key config input."""


@dataclass
class EnvConfig:
    control_hz: float = 90.0
    substeps: int = 5
    discount: float = 0.997
    image_delay_steps: int = 3
    action_delay_steps: int = 1
    mode: str = "train"                  # train | eval
    privileged: bool = False             # emit ground-truth observations
    seed: int = 0
    track_path: str | None = None
    max_episode_steps: int = 2000
    disturbances: bool = True
    randomization_enabled: bool = True
    train_column_prob: float = 0.7       # train profile + any start gate, else eval profile
    image_width: int = 64
    image_height: int = 64
    render_masks: bool = True            # False = physics-only mode (all-zero masks)
    rate_noise: float = 0.0              # uniform half-width on measured body rates
    motor_noise: float = 0.0             # uniform half-width on measured rotor speeds
    flightplan_diff_from_previous: bool = True
    deploy_threshold: float = -0.15
    replay_path: str | None = None
    rand_train: RandomizationConfig = field(default_factory=RandomizationConfig.train_profile)
    rand_eval: RandomizationConfig = field(default_factory=RandomizationConfig.eval_profile)
    base_params: DynamicsParams = field(default_factory=DynamicsParams.nominal)

    def __post_init__(self):
        if self.mode not in ("train", "eval"):
            raise ConfigError(f"mode must be 'train' or 'eval', got {self.mode!r}")
        if self.substeps < 1:
            raise ConfigError("substeps must be >= 1")
        if self.control_hz <= 0:
            raise ConfigError("control_hz must be positive")
        if self.image_delay_steps < 0 or self.action_delay_steps < 0:
            raise ConfigError("delays are whole nonnegative control steps")

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_hz

    @property
    def substep_dt(self) -> float:
        return self.control_dt / self.substeps


_TOP_LEVEL_KEYS = {
    "seed", "mode", "privileged", "track", "control_hz", "substeps", "discount",
    "image_delay_steps", "action_delay_steps", "max_episode_steps", "disturbances",
    "randomization", "image", "sensor_noise", "flight_plan", "dynamics", "replay",
}


def config_from_dict(data: dict, base: EnvConfig | None = None) -> EnvConfig:
    """Build an EnvConfig from a parsed YAML mapping; unknown keys raise."""
    cfg = base or EnvConfig()
    if not data:
        return cfg
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    unknown = set(data) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    updates = {}
    simple = {
        "seed": "seed", "mode": "mode", "privileged": "privileged",
        "track": "track_path", "control_hz": "control_hz", "substeps": "substeps",
        "discount": "discount", "image_delay_steps": "image_delay_steps",
        "action_delay_steps": "action_delay_steps",
        "max_episode_steps": "max_episode_steps", "disturbances": "disturbances",
        "replay": "replay_path",
    }
    for key, attr in simple.items():
        if key in data:
            updates[attr] = data[key]

    if "image" in data:
        img = data["image"] or {}
        unknown = set(img) - {"width", "height", "render"}
        if unknown:
            raise ConfigError(f"unknown image keys: {sorted(unknown)}")
        if "width" in img:
            updates["image_width"] = int(img["width"])
        if "height" in img:
            updates["image_height"] = int(img["height"])
        if "render" in img:
            updates["render_masks"] = bool(img["render"])

    if "sensor_noise" in data:
        sn = data["sensor_noise"] or {}
        unknown = set(sn) - {"rates", "motors"}
        if unknown:
            raise ConfigError(f"unknown sensor_noise keys: {sorted(unknown)}")
        if "rates" in sn:
            updates["rate_noise"] = float(sn["rates"])
        if "motors" in sn:
            updates["motor_noise"] = float(sn["motors"])

    if "flight_plan" in data:
        fp = data["flight_plan"] or {}
        unknown = set(fp) - {"diff_from_previous", "deploy_threshold"}
        if unknown:
            raise ConfigError(f"unknown flight_plan keys: {sorted(unknown)}")
        if "diff_from_previous" in fp:
            updates["flightplan_diff_from_previous"] = bool(fp["diff_from_previous"])
        if "deploy_threshold" in fp:
            updates["deploy_threshold"] = float(fp["deploy_threshold"])

    if "dynamics" in data:
        dyn = data["dynamics"] or {}
        valid = set(DynamicsParams.field_names())
        unknown = set(dyn) - valid
        if unknown:
            raise ConfigError(f"unknown dynamics keys: {sorted(unknown)}")
        try:
            updates["base_params"] = replace(cfg.base_params, **{k: float(v) for k, v in dyn.items()})
        except ValueError as exc:
            raise ConfigError(f"bad dynamics parameters: {exc}") from None

    if "randomization" in data:
        rnd = data["randomization"] or {}
        unknown = set(rnd) - {"enabled", "train_column_prob", "train", "eval"}
        if unknown:
            raise ConfigError(f"unknown randomization keys: {sorted(unknown)}")
        if "enabled" in rnd:
            updates["randomization_enabled"] = bool(rnd["enabled"])
        if "train_column_prob" in rnd:
            updates["train_column_prob"] = float(rnd["train_column_prob"])
        try:
            if "train" in rnd and rnd["train"]:
                updates["rand_train"] = config_overrides(cfg.rand_train, rnd["train"])
            if "eval" in rnd and rnd["eval"]:
                updates["rand_eval"] = config_overrides(cfg.rand_eval, rnd["eval"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    try:
        return replace(cfg, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def load_config(path=None, base: EnvConfig | None = None) -> EnvConfig:
    """Load a YAML config file; None or an empty file yields the defaults."""
    if path is None:
        return base or EnvConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        data = {}
    cfg = config_from_dict(data, base)
    # track paths in a config file resolve relative to the file
    if cfg.track_path is not None and not Path(cfg.track_path).is_absolute():
        candidate = path.parent / cfg.track_path
        if candidate.exists():
            cfg = replace(cfg, track_path=str(candidate))
    return cfg
