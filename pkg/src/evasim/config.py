"""Hierarchical YAML configuration mapped onto the module dataclasses."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .agents import AgentCalibration
from .control import ControllerGains, PreviewConfig
from .dynamics import VehicleParams
from .scenario import ScenarioConfig

EPOCHS = ("spawn", "trial-start")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AnalysisConfig:
    alpha: float = 0.05
    swa_threshold_deg: float = 5.0
    epoch: str = "spawn"

    def __post_init__(self):
        if self.epoch not in EPOCHS:
            raise ValueError(f"epoch must be one of {EPOCHS}, got {self.epoch!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 2021
    n_subjects: int = 12


@dataclass(frozen=True)
class SimConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    controller: ControllerGains = field(default_factory=ControllerGains)
    preview: PreviewConfig = field(default_factory=PreviewConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    agents: AgentCalibration = field(default_factory=AgentCalibration)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)

    def validate(self) -> None:
        try:
            self.scenario.validate(self.vehicle)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, *, seed: int | None = None, epoch: str | None = None) -> "SimConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, experiment=dataclasses.replace(cfg.experiment, master_seed=int(seed)))
        if epoch is not None:
            cfg = dataclasses.replace(cfg, analysis=dataclasses.replace(cfg.analysis, epoch=epoch))
        return cfg


def _build(cls, section: str, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        default = getattr(cls(), k)
        if isinstance(default, tuple):
            v = tuple(v)
        elif isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{section}.{k} must be true/false")
        elif isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{section}.{k} must be a number, got {v!r}")
            v = type(default)(v) if isinstance(default, float) else v
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section!r} section: {exc}") from exc


def config_from_dict(data: dict | None) -> SimConfig:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    sections = {f.name: f.default_factory for f in dataclasses.fields(SimConfig)}
    unknown = sorted(set(data) - set(sections))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    built = {name: _build(factory().__class__, name, data.get(name)) for name, factory in sections.items()}
    cfg = SimConfig(**built)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> SimConfig:
    if path is None:
        return config_from_dict({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(data)
