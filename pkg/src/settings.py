# -*- coding: utf-8 -*-
"""Typed configuration, TOML loading and log setup.

Defaults are the full-size constants (T=1000, gamma=5, K=6, width 128,
8 heads, 50 m radius, 64 epochs at 5e-4). ``configs/desk.toml`` shrinks
the model for laptop runs.
"""
import dataclasses
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11: API-identical backport
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path, PurePath
from typing import Optional

from dotenv import find_dotenv, load_dotenv

from src.exceptions import ConfigError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


@dataclass
class SceneConfig:
    """Feature-building neighborhood; the 20 + 30 step window at 10 Hz is
    fixed by the scenario format (see ``src.data.scenario``)."""
    radius: float = 50.0
    segment_length: float = 2.0


@dataclass
class SyntheticConfig:
    train_count: int = 2000
    val_count: int = 400
    templates: dict = field(default_factory=lambda: {
        'straight': 0.3, 'curved': 0.3, 'intersection': 0.4})
    turn_ratio: float = 0.5
    speed_min: float = 5.0
    speed_max: float = 15.0
    speed_cap: float = 30.0
    accel_std: float = 0.3
    max_curvature: float = 0.15
    min_agents: int = 2
    max_agents: int = 6
    lane_width: float = 3.5


@dataclass
class ModelConfig:
    hidden: int = 128
    heads: int = 8
    interaction_layers: int = 1
    temporal_layers: int = 4
    global_layers: int = 3
    denoiser_blocks: int = 2
    modes: int = 6
    diffusion_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    estimator_width: int = 640
    decoder_hidden: int = 128
    mlp_prior_hidden: int = 384
    prior: str = 'estimator'
    traj_scale: float = 10.0


@dataclass
class TrainConfig:
    epochs: int = 64
    lr: float = 5e-4
    weight_decay: float = 0.01
    lr_schedule: str = 'constant'
    batch_size: int = 32
    seed: int = 0
    gamma: int = 5
    grad_clip: float = 5.0
    stage1_nll_weight: float = 0.1
    stage1_nll_max_tau: int = 100
    stage1_laplace_b: float = 1.0
    stage1_modes: int = 1
    ce_weight: float = 1.0
    soft_target_temperature: float = 1.0
    dtype: str = 'float32'
    checkpoint_every: int = 8
    log_every: int = 10
    validate_every: int = 1
    val_limit: int = 64


@dataclass
class InferenceConfig:
    gamma: int = 5
    sampler: str = 'ddpm'
    label_mode: str = 'literal'
    tail_span: int = 50
    workers: int = 1


@dataclass
class EvalConfig:
    miss_threshold: float = 2.0
    sigmas: list = field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8,
                                                  1.0])
    bench_rows: list = field(default_factory=lambda: [
        'ddpm:1000', 'ddim:50', 'ddim:30', 'ddim:20', 'ddim:5',
        'estimator:5'])
    repeats: int = 5
    ablation_fraction: float = 0.2
    ablation_modes: list = field(default_factory=lambda: [6, 20, 40])
    focal_only: bool = False


@dataclass
class Settings:
    scene: SceneConfig = field(default_factory=SceneConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        if self.train.gamma > self.model.diffusion_steps:
            raise ConfigError(
                f'gamma ({self.train.gamma}) exceeds diffusion steps '
                f'({self.model.diffusion_steps})')
        if self.inference.gamma > self.model.diffusion_steps:
            raise ConfigError(
                f'inference gamma ({self.inference.gamma}) exceeds '
                f'diffusion steps ({self.model.diffusion_steps})')
        if self.model.modes < 1:
            raise ConfigError('model.modes must be >= 1')
        if self.model.hidden % self.model.heads:
            raise ConfigError('model.hidden must be divisible by model.heads')
        if self.model.prior not in ('estimator', 'mlp'):
            raise ConfigError(f'unknown prior {self.model.prior!r}')
        if self.inference.sampler not in ('ddpm', 'ddim'):
            raise ConfigError(
                f'unknown refinement sampler {self.inference.sampler!r}')
        if self.inference.label_mode not in ('literal', 'tail'):
            raise ConfigError(
                f'unknown label mode {self.inference.label_mode!r}')
        return self


def _apply_table(target, table, section):
    known = {f.name for f in dataclasses.fields(target)}
    for key, value in table.items():
        if key not in known:
            raise ConfigError(f'unknown key [{section}] {key}')
        setattr(target, key, value)


def settings_from_dict(data: dict) -> Settings:
    settings = Settings()
    for section, table in (data or {}).items():
        if not hasattr(settings, section) or not isinstance(table, dict):
            raise ConfigError(f'unknown config table [{section}]')
        _apply_table(getattr(settings, section), table, section)
    return settings.validate()


def load_settings(path: Optional[str] = None) -> Settings:
    """Read a TOML config; ``None`` gives the defaults.

    ``ADM_CONFIG`` (possibly from a .env file) supplies a default path.
    """
    load_dotenv(find_dotenv(usecwd=True))
    path = path or os.environ.get('ADM_CONFIG')
    if not path:
        return Settings().validate()
    try:
        with open(path, 'rb') as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f'config file not found: {path}') from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f'{path}: invalid TOML ({e})') from None
    return settings_from_dict(data)


def setup_logging(out_dir, name, level=logging.INFO):
    """Send INFO logs for this run to ``<log_dir>/<name>.log``.

    ``ADM_LOG_DIR`` overrides the default ``<out_dir>/logs``.
    """
    log_dir = os.environ.get('ADM_LOG_DIR') or PurePath(out_dir).joinpath(
        'logs')
    os.makedirs(log_dir, exist_ok=True)
    log_path = Path(log_dir).joinpath(f'{name}.log')
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    file_handler = logging.FileHandler(log_path)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    console = logging.StreamHandler()
    console.setLevel(logging.WARNING)
    console.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(file_handler)
    root.addHandler(console)
    root.setLevel(level)
    return log_path
