"""Experiment configuration: defaults, TOML file, then command-line overrides."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import LearnerConfig
from .geometry import ChannelConfig, CircleSpec, build_path, path_spec_from_mapping
from .navigator import NavigatorConfig
from .plant import PlantConfig, inject_disturbance

OBSERVE_MODES = ("direct", "vision")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    navigator: NavigatorConfig = field(default_factory=NavigatorConfig)
    path: object = field(default_factory=CircleSpec)
    delta: float = 5.0
    seed: int = 1
    out: str | None = None
    observe: str = "direct"
    disturb: bool = False

    def __post_init__(self):
        if self.observe not in OBSERVE_MODES:
            raise ConfigError(f"observe must be one of {OBSERVE_MODES}, got {self.observe!r}")
        if self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.plant.grid_n != self.channel.grid_n:
            raise ConfigError("plant.grid_n and channel.grid_n differ")

    def effective_plant(self) -> PlantConfig:
        """Plant as simulated: seeded by the experiment, disturbed if requested."""
        p = replace(self.plant, seed=self.seed)
        return inject_disturbance(p) if self.disturb else p

    def target_path(self):
        return build_path(self.path, self.delta, self.channel.grid_n)


def _section(cls, table: Mapping[str, Any], name: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(unknown)}")
    kw = dict(table)
    if "resonances_mhz" in kw:
        kw["resonances_mhz"] = tuple(kw["resonances_mhz"])
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


_SECTIONS = {"plant": PlantConfig, "learner": LearnerConfig, "channel": ChannelConfig,
             "navigator": NavigatorConfig}
_TOP = ("delta", "seed", "out", "observe", "disturb")


def from_mapping(data: Mapping[str, Any]) -> ExperimentConfig:
    unknown = sorted(set(data) - set(_SECTIONS) - set(_TOP) - {"path"})
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kw: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            if not isinstance(data[name], Mapping):
                raise ConfigError(f"[{name}] must be a table")
            kw[name] = _section(cls, data[name], name)
    if "path" in data:
        try:
            kw["path"] = path_spec_from_mapping(dict(data["path"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[path] {exc}") from None
    for key in _TOP:
        if key in data:
            kw[key] = data[key]
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_mapping(data)


def apply_overrides(cfg: ExperimentConfig, *, seed=None, out=None, path=None, alpha=None,
                    beta=None, delta=None, disturb=None, observe=None) -> ExperimentConfig:
    """Flags win over the file; ``None`` means the flag was not given."""
    learner = cfg.learner
    try:
        if alpha is not None:
            learner = replace(learner, alpha=alpha)
        if beta is not None:
            learner = replace(learner, beta=beta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    top = {k: v for k, v in dict(seed=seed, out=out, path=path, delta=delta, disturb=disturb,
                                  observe=observe).items() if v is not None}
    return replace(cfg, learner=learner, **top)
