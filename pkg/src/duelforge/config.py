"""Run configuration: dataclass sections read from and echoed to INI-style text.

Every command writes the fully resolved config next to its outputs as
``config.ini``; feeding that file back with ``--config`` reproduces the run.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


@dataclass
class EnvSection:
    frame_skip: int = 4
    sticky_prob: float = 0.25
    max_episode_steps: int = 200
    noop_max: int = 0


@dataclass
class LearnerSection:
    discount: float = 0.99
    target_sync_period: int = 1000
    huber_delta: float = 1.0
    warmup_factor: int = 10
    alpha: float = 0.6
    beta_start: float = 0.4
    priority_floor: float = 1e-5
    compute_dtype: str = "float32"


@dataclass
class SinglePlayerSection:
    steps: int = 300_000
    seed: int = 99
    learning_rate: float = 1e-4
    batch_size: int = 32
    buffer_size: int = 100_000
    num_envs: int = 10
    updates_per_step: float = 0.25
    epsilon_start: float = 1.0
    epsilon_floor: float = 0.05
    epsilon_decay_fraction: float = 0.1


@dataclass
class TwoPlayerSection:
    seeds: tuple[int, ...] = (24, 42, 56, 99, 3000)
    episode_budget: int = 2_000
    step_cap: int = 4_000_000
    self_play_sync_period: int = 50_000
    opponent_epsilon: float = 0.05
    freeze_layers: int = 2
    learning_rate: float = 1e-3
    batch_size: int = 256
    buffer_size: int = 500_000
    epsilon_start: float = 1.0
    epsilon_decay_rate: float = 0.9999985
    epsilon_floor: float = 0.05
    record_wall_time: bool = False
    cache_frozen_features: bool = True


@dataclass
class RamscopeSection:
    steps: int = 50_000
    seed: int = 0
    kernel_size: int = 11
    cap: float = 3000.0
    include_center: bool = False
    boundary: str = "truncate"


@dataclass
class MetricsSection:
    window: int = 10
    winsor_level: float = 0.90
    winsor_tail: float = -1.0  # negative: derive from winsor_level
    last_n: int = 100
    checkpoints: tuple[int, ...] = (1, 1000, 2000)


@dataclass
class Config:
    game: str = "duelpong"
    env: EnvSection = field(default_factory=EnvSection)
    learner: LearnerSection = field(default_factory=LearnerSection)
    single_player: SinglePlayerSection = field(default_factory=SinglePlayerSection)
    two_player: TwoPlayerSection = field(default_factory=TwoPlayerSection)
    ramscope: RamscopeSection = field(default_factory=RamscopeSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)

    def validate(self) -> "Config":
        tp, sp = self.two_player, self.single_player
        if not tp.seeds:
            raise ConfigError("two_player.seeds must not be empty")
        if tp.episode_budget < 1 or tp.step_cap < 1 or sp.steps < 0:
            raise ConfigError("budgets must be positive")
        if not 0 <= tp.freeze_layers <= 3:
            raise ConfigError("two_player.freeze_layers must be in [0, 3]")
        if tp.self_play_sync_period < 1:
            raise ConfigError("two_player.self_play_sync_period must be positive")
        if self.ramscope.kernel_size < 3 or self.ramscope.kernel_size % 2 == 0:
            raise ConfigError("ramscope.kernel_size must be odd and >= 3")
        if self.ramscope.boundary not in ("truncate", "valid"):
            raise ConfigError("ramscope.boundary must be truncate or valid")
        if self.learner.compute_dtype not in ("float32", "float64"):
            raise ConfigError("learner.compute_dtype must be float32 or float64")
        return self


SECTIONS = ("env", "learner", "single_player", "two_player", "ramscope", "metrics")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def _parse(raw: str, current, where: str):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw.replace("_", ""))
        if isinstance(current, float):
            return float(raw.replace("_", ""))
        if isinstance(current, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(current).__name__}") from None
    return raw


def set_value(cfg: Config, section: str | None, key: str, raw: str) -> None:
    target = cfg if section in (None, "", "run") else getattr(cfg, section, None)
    if target is None or section not in (None, "", "run", *SECTIONS):
        raise ConfigError(f"unknown config section [{section}]")
    names = {f.name for f in dataclasses.fields(target) if not dataclasses.is_dataclass(getattr(target, f.name))}
    if key not in names:
        raise ConfigError(f"unknown config key {key!r} in [{section or 'run'}]")
    setattr(target, key, _parse(raw, getattr(target, key), f"[{section or 'run'}] {key}"))


def loads(text: str, base: Config | None = None) -> Config:
    cfg = base if base is not None else Config()
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for section in parser.sections():
        for key, raw in parser.items(section):
            set_value(cfg, section, key, raw)
    return cfg.validate()


def load(path, base: Config | None = None) -> Config:
    with open(path) as fh:
        return loads(fh.read(), base)


def dumps(cfg: Config) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["run"] = {"game": cfg.game}
    for name in SECTIONS:
        section = getattr(cfg, name)
        parser[name] = {f.name: _format(getattr(section, f.name)) for f in dataclasses.fields(section)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def to_dict(cfg: Config) -> dict:
    return dataclasses.asdict(cfg)


def config_hash(cfg: Config) -> str:
    return hashlib.sha256(json.dumps(to_dict(cfg), sort_keys=True, default=list).encode()).hexdigest()[:16]
