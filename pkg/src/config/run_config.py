"""Run configuration for the LSTC safe-driving training system

A run configuration file is a flat, human-readable text with sections:

    # comment
    [ppo]
    gamma = 0.99
    batch_size = 20000

Every key omitted from the file keeps its default from src.config.config, so
an empty file gives the reference hyperparameters. Unknown sections or
keys are rejected with the offending line number.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

from src.config import config as defaults
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSection:
    seed: int = defaults.DEFAULT_SEED
    mode: str = defaults.DEFAULT_MODE
    total_steps: int = defaults.TOTAL_TRAINING_STEPS
    checkpoint_every: int = defaults.CHECKPOINT_EVERY
    workers: int = defaults.ROLLOUT_WORKERS
    output_dir: str = str(defaults.OUTPUT_DATA_DIR)


@dataclass(frozen=True)
class NetworkConfig:
    hidden_layers: int = defaults.HIDDEN_LAYERS
    hidden_size: int = defaults.HIDDEN_SIZE
    activation: str = defaults.HIDDEN_ACTIVATION
    log_std_init: float = defaults.LOG_STD_INIT


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = defaults.GAMMA
    gae_lambda: float = defaults.GAE_LAMBDA
    clip_eps: float = defaults.CLIP_EPSILON
    batch_size: int = defaults.BATCH_SIZE
    minibatch_size: int = defaults.MINIBATCH_SIZE
    update_epochs: int = defaults.UPDATE_EPOCHS
    validation_epochs: int = defaults.VALIDATION_EPOCHS
    policy_lr: float = defaults.POLICY_LR
    value_lr: float = defaults.VALUE_LR
    cost_value_lr: float = defaults.COST_VALUE_LR
    validation_lr: float = defaults.VALIDATION_LR
    entropy_coef: float = defaults.ENTROPY_COEF
    window_length: int = defaults.WINDOW_LENGTH


@dataclass(frozen=True)
class LagrangeConfig:
    lambda_long_init: float = defaults.LAMBDA_LONG_INIT
    lambda_short_init: float = defaults.LAMBDA_SHORT_INIT
    lambda_long_lr: float = defaults.LAMBDA_LONG_LR
    lambda_short_lr: float = defaults.LAMBDA_SHORT_LR
    cost_limit: float = defaults.COST_LIMIT
    lambda_max: float = defaults.LAMBDA_MAX
    update_mode: str = defaults.DEFAULT_MULTIPLIER_UPDATE_MODE


@dataclass(frozen=True)
class EnvConfig:
    dt: float = defaults.TIME_STEP
    max_steering: float = defaults.MAX_STEERING
    accel_min: float = defaults.ACCEL_MIN
    accel_max: float = defaults.ACCEL_MAX
    wheelbase: float = defaults.WHEELBASE
    ego_radius: float = defaults.EGO_RADIUS
    max_speed: float = defaults.MAX_SPEED
    max_steps: int = defaults.MAX_EPISODE_STEPS
    lidar_range: float = defaults.LIDAR_RANGE
    reward_distance: float = defaults.REWARD_DISTANCE_COEF
    reward_speed: float = defaults.REWARD_SPEED_COEF
    reward_yaw: float = defaults.REWARD_YAW_COEF
    reward_steering: float = defaults.REWARD_STEERING_COEF
    success_reward: float = defaults.SUCCESS_REWARD
    departure_reward: float = defaults.DEPARTURE_REWARD


@dataclass(frozen=True)
class MapConfig:
    layout: str = ""
    lane_count: int = defaults.LANE_COUNT
    lane_width: float = defaults.LANE_WIDTH
    checkpoint_spacing: float = defaults.CHECKPOINT_SPACING
    min_segments: int = defaults.MIN_SEGMENTS
    max_segments: int = defaults.MAX_SEGMENTS
    min_radius: float = defaults.MIN_ARC_RADIUS
    max_radius: float = defaults.MAX_ARC_RADIUS
    max_sweep: float = defaults.MAX_ARC_SWEEP
    min_length: float = defaults.MIN_ROUTE_LENGTH
    max_length: float = defaults.MAX_ROUTE_LENGTH
    train_maps: int = defaults.TRAIN_MAPS
    eval_maps: int = defaults.EVAL_MAPS
    seed: int = defaults.MAP_SEED
    eval_seed_offset: int = defaults.EVAL_MAP_SEED_OFFSET


@dataclass(frozen=True)
class TrafficConfig:
    density: float = defaults.TRAFFIC_DENSITY
    accident_prob: float = defaults.ACCIDENT_PROB
    speed: float = defaults.TRAFFIC_SPEED
    gap_distance: float = defaults.GAP_DISTANCE
    gap_deceleration: float = defaults.GAP_DECELERATION
    acceleration: float = defaults.TRAFFIC_ACCELERATION
    lane_change_prob: float = defaults.LANE_CHANGE_PROB
    spawn_clearance: float = defaults.SPAWN_CLEARANCE


@dataclass(frozen=True)
class EvalConfig:
    group_size: int = defaults.EVAL_GROUP_SIZE
    repeats: int = defaults.EVAL_REPEATS
    seed: int = defaults.EVAL_SEED


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    lagrange: LagrangeConfig = field(default_factory=LagrangeConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    map: MapConfig = field(default_factory=MapConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


SECTION_NAMES = tuple(f.name for f in dataclasses.fields(RunConfig))


def _section_fields(section_name):
    section_type = {f.name: f.default_factory for f in dataclasses.fields(RunConfig)}[section_name]
    return {f.name: f for f in dataclasses.fields(section_type)}, section_type


def _coerce(raw, target_type, key, line):
    """Convert a raw text value to the declared field type"""
    if target_type is str:
        if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
            return raw[1:-1]
        return raw
    if target_type is int:
        try:
            return int(raw)
        except ValueError:
            pass
        try:
            as_float = float(raw)
        except ValueError:
            raise ConfigError(f"'{key}' expects an integer, got '{raw}'", line=line)
        if not as_float.is_integer():
            raise ConfigError(f"'{key}' expects an integer, got '{raw}'", line=line)
        return int(as_float)
    if target_type is float:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"'{key}' expects a number, got '{raw}'", line=line)
    raise ConfigError(f"'{key}' has unsupported type {target_type}", line=line)


def parse_config_text(text):
    """Parse configuration text into a validated RunConfig

    Args:
        text (str): configuration file contents

    Returns:
        RunConfig: parsed configuration with defaults for omitted keys

    Raises:
        ConfigError: on any syntax, unknown key or range problem
    """
    values = {name: {} for name in SECTION_NAMES}
    current = None
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header '{line}'", line=line_number)
            current = line[1:-1].strip()
            if current not in values:
                raise ConfigError(f"unknown section [{current}]", line=line_number)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'", line=line_number)
        if current is None:
            raise ConfigError("key outside of any section", line=line_number)
        key, raw_value = (part.strip() for part in line.split("=", 1))
        fields, _ = _section_fields(current)
        if key not in fields:
            raise ConfigError(f"unknown key '{key}' in section [{current}]", line=line_number)
        if key in values[current]:
            raise ConfigError(f"duplicate key '{key}' in section [{current}]", line=line_number)
        values[current][key] = _coerce(raw_value, fields[key].type, key, line_number)

    sections = {}
    for name in SECTION_NAMES:
        _, section_type = _section_fields(name)
        sections[name] = section_type(**values[name])
    run_config = RunConfig(**sections)
    validate_config(run_config)
    return run_config


def serialize_config(run_config):
    """Render a RunConfig as configuration text that parses back to an equal object"""
    lines = []
    for section in dataclasses.fields(run_config):
        lines.append(f"[{section.name}]")
        section_value = getattr(run_config, section.name)
        for item in dataclasses.fields(section_value):
            value = getattr(section_value, item.name)
            rendered = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{item.name} = {rendered}")
        lines.append("")
    return "\n".join(lines)


def load_config(path=None):
    """Load a configuration file, or the defaults when path is None

    Args:
        path (str or Path, optional): configuration file

    Returns:
        RunConfig: the parsed configuration
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}")
    logger.info(f"Loaded configuration from {path}")
    return parse_config_text(text)


def with_overrides(run_config, seed=None, mode=None, output_dir=None):
    """Return a copy of run_config with command-line overrides applied"""
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
    if mode is not None:
        changes["mode"] = mode
    if output_dir is not None:
        changes["output_dir"] = str(output_dir)
    if not changes:
        return run_config
    updated = dataclasses.replace(run_config, run=dataclasses.replace(run_config.run, **changes))
    validate_config(updated)
    return updated


def _require(condition, message):
    if not condition:
        raise ConfigError(message)


def validate_config(run_config):
    """Check value ranges and cross-field consistency

    Raises:
        ConfigError: describing the first violated rule
    """
    run, net, ppo = run_config.run, run_config.network, run_config.ppo
    lag, env, road, traffic = run_config.lagrange, run_config.env, run_config.map, run_config.traffic
    ev = run_config.eval

    _require(run.mode in defaults.RUN_MODES, f"run.mode must be one of {defaults.RUN_MODES}, got '{run.mode}'")
    _require(run.total_steps > 0, "run.total_steps must be positive")
    _require(run.checkpoint_every > 0, "run.checkpoint_every must be positive")
    _require(run.workers >= 1, "run.workers must be at least 1")

    _require(net.hidden_layers >= 1, "network.hidden_layers must be at least 1")
    _require(net.hidden_size >= 1, "network.hidden_size must be at least 1")
    _require(net.activation in ("tanh", "relu"), "network.activation must be 'tanh' or 'relu'")

    _require(0.0 <= ppo.gamma <= 1.0, "ppo.gamma must lie in [0, 1]")
    _require(0.0 <= ppo.gae_lambda <= 1.0, "ppo.gae_lambda must lie in [0, 1]")
    _require(0.0 < ppo.clip_eps < 1.0, "ppo.clip_eps must lie in (0, 1)")
    _require(ppo.batch_size >= 1, "ppo.batch_size must be positive")
    _require(1 <= ppo.minibatch_size <= ppo.batch_size, "ppo.minibatch_size must lie in [1, batch_size]")
    _require(ppo.update_epochs >= 1 and ppo.validation_epochs >= 0, "ppo update passes out of range")
    for name in ("policy_lr", "value_lr", "cost_value_lr", "validation_lr"):
        _require(getattr(ppo, name) > 0.0, f"ppo.{name} must be positive")
    _require(ppo.entropy_coef >= 0.0, "ppo.entropy_coef must be non-negative")
    _require(ppo.window_length >= 1, "ppo.window_length must be at least 1")

    _require(lag.lambda_long_init >= 0.0 and lag.lambda_short_init >= 0.0, "initial multipliers must be non-negative")
    _require(lag.lambda_long_lr >= 0.0 and lag.lambda_short_lr >= 0.0, "multiplier step sizes must be non-negative")
    _require(lag.lambda_max > 0.0, "lagrange.lambda_max must be positive")
    _require(lag.update_mode in defaults.MULTIPLIER_UPDATE_MODES,
             f"lagrange.update_mode must be one of {defaults.MULTIPLIER_UPDATE_MODES}")

    _require(env.dt > 0.0 and env.wheelbase > 0.0 and env.max_speed > 0.0, "env dt, wheelbase, max_speed must be positive")
    _require(env.max_steering > 0.0, "env.max_steering must be positive")
    _require(env.accel_min <= 0.0 <= env.accel_max, "env acceleration range must contain 0")
    _require(env.max_steps >= 1, "env.max_steps must be positive")
    _require(env.lidar_range > 0.0 and env.ego_radius > 0.0, "env lidar_range and ego_radius must be positive")

    _require(road.lane_count >= 1 and road.lane_width > 0.0, "map lane_count and lane_width must be positive")
    _require(road.checkpoint_spacing > 0.0, "map.checkpoint_spacing must be positive")
    _require(1 <= road.min_segments <= road.max_segments, "map segment range must satisfy 1 <= min <= max")
    _require(0.0 < road.min_radius <= road.max_radius, "map radius range must satisfy 0 < min <= max")
    _require(road.max_sweep >= 0.0, "map.max_sweep must be non-negative")
    _require(0.0 < road.min_length <= road.max_length, "map length range must satisfy 0 < min <= max")
    _require(road.train_maps >= 1 and road.eval_maps >= 1, "map pools must hold at least one map")
    _require(road.eval_seed_offset >= road.train_maps,
             "map.eval_seed_offset must be at least train_maps so evaluation maps stay unseen")

    _require(traffic.density >= 0.0, "traffic.density must be non-negative")
    _require(0.0 <= traffic.accident_prob <= 1.0, "traffic.accident_prob must lie in [0, 1]")
    _require(0.0 <= traffic.lane_change_prob <= 1.0, "traffic.lane_change_prob must lie in [0, 1]")
    _require(traffic.speed >= 0.0 and traffic.gap_distance >= 0.0, "traffic speed and gap must be non-negative")

    _require(ev.group_size >= 1 and ev.repeats >= 1, "eval group_size and repeats must be positive")
