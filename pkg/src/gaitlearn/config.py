"""Experiment configuration: defaults, presets, and TOML ingestion.

The built-in defaults are the reference parameter set used across the test
suite; a config file only needs the keys it wants to change.  Unknown keys
are rejected so typos fail loudly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import tomli

from .control import POLICY_KINDS
from .dynamics import PhysicalParams
from .fpf import FilterSettings
from .phase import PhaseModel
from .qlearn import LearnConfig
from .sensor import SensorConfig

PRESETS = ("full", "small")

CALIBRATIONS = ("first-harmonic", "grid")

_DEFAULT_GRID = tuple(round(c, 2) for c in
                      [x * 0.05 for x in range(-16, 0)] +
                      [x * 0.05 for x in range(1, 17)])


@dataclass(frozen=True)
class PolicySettings:
    kind: str = "learned"
    c: float = math.nan              # nan means "calibrate from trained weights"
    calibration: str = "first-harmonic"
    eval_periods: float = 20.0
    warmup_periods: float = 10.0
    grid_c: Tuple[float, ...] = _DEFAULT_GRID

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}, "
                             f"expected one of {POLICY_KINDS}")
        if self.calibration not in CALIBRATIONS:
            raise ValueError(f"unknown calibration {self.calibration!r}, "
                             f"expected one of {CALIBRATIONS}")
        if self.eval_periods <= 0 or self.warmup_periods < 0:
            raise ValueError("eval_periods must be positive and warmup_periods non-negative")


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    runs: int = 1
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class ExperimentConfig:
    physical: PhysicalParams = field(default_factory=PhysicalParams)
    sensor_sigma_w: float = 0.1
    filter: FilterSettings = field(default_factory=FilterSettings)
    phase_r: float = 0.56
    learn: LearnConfig = field(default_factory=LearnConfig)
    policy: PolicySettings = field(default_factory=PolicySettings)
    run: RunSettings = field(default_factory=RunSettings)
    preset: str = "full"

    @property
    def sensor(self) -> SensorConfig:
        return SensorConfig(sigma_w=self.sensor_sigma_w, dt=self.learn.dt)

    @property
    def phase_model(self) -> PhaseModel:
        return PhaseModel(r=self.phase_r, omega0=self.physical.omega0)

    @property
    def period(self) -> float:
        return self.physical.period


# TOML section -> (target dataclass, config field)
_SECTION_TYPES = {
    "physical": PhysicalParams,
    "fpf": FilterSettings,
    "learn": LearnConfig,
    "policy": PolicySettings,
    "run": RunSettings,
}

_SCALAR_SECTIONS = {
    "sensor": ("sigma_w",),
    "phase": ("r",),
}


def default_config(preset: str = "full") -> ExperimentConfig:
    """Built-in configuration; the small preset trims it to desk scale."""
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}, expected one of {PRESETS}")
    cfg = ExperimentConfig(preset=preset)
    if preset == "small":
        cfg = dataclasses.replace(
            cfg,
            filter=dataclasses.replace(cfg.filter, n_particles=200),
            learn=dataclasses.replace(cfg.learn, horizon_periods=50.0),
            run=dataclasses.replace(cfg.run, runs=5),
        )
    return cfg


def _coerce(cls: type, name: str, value: Any, where: str) -> Any:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    if name not in fields:
        raise ValueError(f"unknown config key: {where}.{name}")
    target = fields[name].type
    if isinstance(value, bool):
        raise ValueError(f"config key {where}.{name} must be a number or string, got bool")
    if target == "int":
        if not isinstance(value, int):
            raise ValueError(f"config key {where}.{name} must be an integer, got {value!r}")
        return value
    if target == "float":
        if not isinstance(value, (int, float)):
            raise ValueError(f"config key {where}.{name} must be a number, got {value!r}")
        return float(value)
    if target == "str":
        if not isinstance(value, str):
            raise ValueError(f"config key {where}.{name} must be a string, got {value!r}")
        return value
    if target.startswith("Tuple"):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ValueError(f"config key {where}.{name} must be an array of numbers")
        return tuple(float(v) for v in value)
    return value


def _apply_section(obj: Any, section: str, data: Dict[str, Any]) -> Any:
    cls = type(obj)
    updates = {name: _coerce(cls, name, value, section) for name, value in data.items()}
    return dataclasses.replace(obj, **updates)


def load_config(path: Optional[str] = None, preset: str = "full",
                seed: Optional[int] = None, runs: Optional[int] = None,
                out_dir: Optional[str] = None, workers: Optional[int] = None) -> ExperimentConfig:
    """Resolve the configuration: defaults, then preset, then file, then flags."""
    cfg = default_config(preset)
    if path is not None:
        file_path = Path(path)
        if not file_path.exists():
            raise FileNotFoundError(f"config file not found: {file_path}")
        with open(file_path, "rb") as fh:
            try:
                raw = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ValueError(f"invalid TOML in {file_path}: {exc}") from exc
        for section, data in raw.items():
            if not isinstance(data, dict):
                raise ValueError(f"unknown config key: {section} (top-level keys must be sections)")
            if section in _SECTION_TYPES:
                current = getattr(cfg, "filter" if section == "fpf" else section)
                updated = _apply_section(current, section, data)
                field_name = "filter" if section == "fpf" else section
                cfg = dataclasses.replace(cfg, **{field_name: updated})
            elif section in _SCALAR_SECTIONS:
                allowed = _SCALAR_SECTIONS[section]
                for key, value in data.items():
                    if key not in allowed:
                        raise ValueError(f"unknown config key: {section}.{key}")
                    if not isinstance(value, (int, float)) or isinstance(value, bool):
                        raise ValueError(f"config key {section}.{key} must be a number")
                    cfg = dataclasses.replace(cfg, **{f"{section}_{key}": float(value)})
            else:
                raise ValueError(f"unknown config section: {section}")
    run_updates: Dict[str, Any] = {}
    if seed is not None:
        run_updates["seed"] = seed
    if runs is not None:
        run_updates["runs"] = runs
    if out_dir is not None:
        run_updates["out_dir"] = out_dir
    if workers is not None:
        run_updates["workers"] = workers
    if run_updates:
        cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, **run_updates))
    return cfg


def config_dict(cfg: ExperimentConfig) -> Dict[str, Any]:
    """Full resolved configuration as a JSON-ready dictionary."""
    return {
        "preset": cfg.preset,
        "physical": dataclasses.asdict(cfg.physical),
        "sensor": {"sigma_w": cfg.sensor_sigma_w, "dt": cfg.learn.dt},
        "fpf": dataclasses.asdict(cfg.filter),
        "phase": {"r": cfg.phase_r, "omega0": cfg.physical.omega0},
        "learn": dataclasses.asdict(cfg.learn),
        "policy": {**dataclasses.asdict(cfg.policy), "grid_c": list(cfg.policy.grid_c)},
        "run": dataclasses.asdict(cfg.run),
        "period": cfg.period,
    }
