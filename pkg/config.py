# qcloud-lab/config.py - Configuration Management

import json
import os
import typing
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

from errors import ConfigError, MissingArtifactError
from fleet import DEFAULT_CALIBRATION_PERIOD, FleetSpec
from predictors import DEFAULT_MAX_ITER, DEFAULT_TOL, DEFAULT_TRAIN_FRACTION
from scheduler import POLICY_KINDS, UtilityConfig
from utils.validation import is_seed

# Base directory
BASE_DIR = Path(__file__).parent


def load_env_file():
    """Load environment variables from .env file if it exists."""
    env_file = BASE_DIR / '.env'
    if env_file.exists():
        with open(env_file, 'r', encoding='utf-8') as f:
            for line in f:
                line = line.strip()
                if line and not line.startswith('#') and '=' in line:
                    key, value = line.split('=', 1)
                    # Only set if not already in environment
                    if key not in os.environ:
                        os.environ[key] = value

# Load .env file if it exists
load_env_file()


class Config:
    """Base configuration class."""

    OUTPUT_DIR = os.environ.get('QCLOUD_OUTPUT_DIR', 'out')
    LOG_LEVEL = os.environ.get('QCLOUD_LOG_LEVEL', 'INFO').upper()

    # Threads used to run the policies of one scenario
    POLICY_WORKERS = int(os.environ.get('QCLOUD_POLICY_WORKERS', 1))


class DevelopmentConfig(Config):
    """Development configuration."""
    LOG_LEVEL = os.environ.get('QCLOUD_LOG_LEVEL', 'DEBUG').upper()


class TestingConfig(Config):
    """Testing configuration."""
    LOG_LEVEL = 'WARNING'
    POLICY_WORKERS = 1


class ProductionConfig(Config):
    """Configuration for long experiment batches."""
    POLICY_WORKERS = int(os.environ.get('QCLOUD_POLICY_WORKERS', os.cpu_count() or 1))


# Configuration mapping
config_map = {
    'development': DevelopmentConfig,
    'testing': TestingConfig,
    'production': ProductionConfig,
    'default': Config
}


def get_config(config_name=None):
    """Get configuration based on environment or provided name."""
    if config_name is None:
        config_name = os.environ.get('QCLOUD_ENV', 'default')

    return config_map.get(config_name, Config)


# --- experiment files ---

@dataclass(frozen=True)
class FitSettings:
    cycles_per_machine: int = 8
    train_fraction: float = DEFAULT_TRAIN_FRACTION
    split_seed: int = 0
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    timing_samples_per_machine: int = 60
    timing_seed: int = 1
    timing_noise: float = 0.05

    def __post_init__(self):
        if self.cycles_per_machine < 1:
            raise ConfigError("cycles_per_machine must be >= 1", field='fit.cycles_per_machine')
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)", field='fit.train_fraction')
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1", field='fit.max_iter')
        if self.timing_samples_per_machine < 2:
            raise ConfigError("timing_samples_per_machine must be >= 2", field='fit.timing_samples_per_machine')
        if not 0.0 <= self.timing_noise < 1.0:
            raise ConfigError("timing_noise must be in [0, 1)", field='fit.timing_noise')
        for name in ('split_seed', 'timing_seed'):
            if not is_seed(getattr(self, name)):
                raise ConfigError(f"{name} must be a 64-bit non-negative integer", field=f'fit.{name}')


@dataclass(frozen=True)
class ScenarioSettings:
    policies: Tuple[str, ...] = POLICY_KINDS
    load: str = 'low'
    max_queue: float = float(DEFAULT_CALIBRATION_PERIOD)
    job_count: int = 100
    batch_range: Tuple[int, int] = (1, 75)
    shots: int = 4096
    qos: Optional[float] = None
    cc_aware: bool = False
    stagger: bool = False
    sustained_load: bool = True
    arrival_window: Optional[float] = None
    exec_noise: float = 0.05
    job_seed: int = 7
    filler_seed: int = 11
    noise_seed: int = 13
    max_workers: Optional[int] = None

    def __post_init__(self):
        if not self.policies:
            raise ConfigError("at least one policy is required", field='scenario.policies')
        if self.load not in ('low', 'high', 'random'):
            raise ConfigError("load must be low, high or random", field='scenario.load')
        if self.max_queue <= 0:
            raise ConfigError("max_queue must be positive", field='scenario.max_queue')
        if self.qos is not None and self.qos <= 0:
            raise ConfigError("qos must be positive", field='scenario.qos')
        for name in ('job_seed', 'filler_seed', 'noise_seed'):
            if not is_seed(getattr(self, name)):
                raise ConfigError(f"{name} must be a 64-bit non-negative integer", field=f'scenario.{name}')


@dataclass(frozen=True)
class PathSettings:
    out_dir: str = Config.OUTPUT_DIR
    fleet: str = 'fleet.json'
    fidelity_model: str = 'fidelity_model.json'
    runtime_model: str = 'runtime_model.json'
    fit_report: str = 'fit_report.json'

    def resolve(self, name: str) -> Path:
        """Relative artifact paths live under out_dir."""
        path = Path(getattr(self, name))
        return path if path.is_absolute() else Path(self.out_dir) / path


@dataclass(frozen=True)
class ExperimentConfig:
    fleet: FleetSpec = field(default_factory=FleetSpec)
    fit: FitSettings = field(default_factory=FitSettings)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    paths: PathSettings = field(default_factory=PathSettings)
    seed: Optional[int] = None

    def __post_init__(self):
        if self.seed is not None and not is_seed(self.seed):
            raise ConfigError("seed must be a 64-bit non-negative integer", field='seed')


def _check_type(value, annotation, path: str):
    """Convert a parsed JSON value to the annotated field type or raise ConfigError naming the field."""
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)

    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _check_type(value, inner, path)

    if is_dataclass(annotation):
        if not isinstance(value, dict):
            raise ConfigError("expected an object", field=path)
        return _build(annotation, value, path)

    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError("expected a list", field=path)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_check_type(v, args[0], f'{path}[{i}]') for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"expected a list of {len(args)} values", field=path)
        return tuple(_check_type(v, a, f'{path}[{i}]') for i, (v, a) in enumerate(zip(value, args)))

    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigError("expected true or false", field=path)
        return value
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", field=path)
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", field=path)
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigError("expected a string", field=path)
        return value
    raise ConfigError(f"unsupported field type {annotation!r}", field=path)


def _build(cls, data: dict, prefix: str = ''):
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    for key in data:
        if key not in known:
            raise ConfigError("unknown key", field=f'{prefix}.{key}' if prefix else key)
    kwargs = {}
    for name, value in data.items():
        path = f'{prefix}.{name}' if prefix else name
        kwargs[name] = _check_type(value, hints[name], path)
    return cls(**kwargs)


def parse_experiment_config(text: str, source: str = '<config>') -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: malformed JSON: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    return _build(ExperimentConfig, data)


def load_experiment_config(path=None) -> ExperimentConfig:
    """Read an experiment file; without a path the built-in defaults are used."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"config file not found: {path}")
    return parse_experiment_config(path.read_text(encoding='utf-8'), str(path))


def apply_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Derive every section seed from one master seed."""
    if not is_seed(seed):
        raise ConfigError("seed must be a 64-bit non-negative integer", field='seed')
    return replace(
        cfg,
        seed=seed,
        fleet=replace(cfg.fleet, rng_seed=seed),
        fit=replace(cfg.fit, split_seed=seed, timing_seed=seed + 1),
        scenario=replace(cfg.scenario, job_seed=seed + 2, filler_seed=seed + 3, noise_seed=seed + 4),
    )


def apply_overrides(
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    policies: Tuple[str, ...] = (),
    load: Optional[str] = None,
    qos: Optional[float] = None,
    cc_aware: Optional[bool] = None,
    stagger: Optional[bool] = None,
) -> ExperimentConfig:
    """Command-line flags win over file values; None leaves the file value."""
    if cfg.seed is not None and seed is None:
        cfg = apply_seed(cfg, cfg.seed)
    if seed is not None:
        cfg = apply_seed(cfg, seed)
    if out is not None:
        cfg = replace(cfg, paths=replace(cfg.paths, out_dir=out))

    scenario = {}
    if policies:
        scenario['policies'] = tuple(policies)
    if load is not None:
        scenario['load'] = load
    if qos is not None:
        scenario['qos'] = qos
    if cc_aware is not None:
        scenario['cc_aware'] = cc_aware
    if stagger is not None:
        scenario['stagger'] = stagger
    if scenario:
        cfg = replace(cfg, scenario=replace(cfg.scenario, **scenario))
    return cfg


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-JSON view of a resolved config, written next to run outputs."""
    def convert(obj):
        if is_dataclass(obj):
            return {f.name: convert(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, tuple):
            return [convert(v) for v in obj]
        return obj
    return convert(cfg)
