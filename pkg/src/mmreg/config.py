"""Pipeline configuration: one JSON object, nested per stage, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .coarse import OptimizerConfig
from .demons import DemonsConfig
from .edges import EdgeConfig
from .errors import ConfigError
from .evaluation import DEFAULT_SCALE_MM
from .metrics import DEFAULT_BINS

_SECTIONS = {"optimizer": OptimizerConfig, "edges": EdgeConfig, "demons": DemonsConfig}


@dataclass(frozen=True)
class PipelineConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    edges: EdgeConfig = field(default_factory=EdgeConfig)
    demons: DemonsConfig = field(default_factory=DemonsConfig)
    bins: int = DEFAULT_BINS
    n_samples: int = 20000
    seed: int = 7
    roi: Optional[tuple] = None  # (x, y, w, h) in pixels
    scale_factor_mm_per_px: float = DEFAULT_SCALE_MM

    def __post_init__(self):
        if int(self.bins) != self.bins or self.bins < 2:
            raise ConfigError("bins must be an integer >= 2")
        if int(self.n_samples) != self.n_samples or self.n_samples < 100:
            raise ConfigError("n_samples must be an integer >= 100")
        if int(self.seed) != self.seed:
            raise ConfigError("seed must be an integer")
        if self.roi is not None:
            roi = tuple(self.roi)
            if len(roi) != 4 or any(int(v) != v for v in roi) or roi[2] < 1 or roi[3] < 1:
                raise ConfigError("roi must be four integers (x, y, w, h) with positive size")
            object.__setattr__(self, "roi", tuple(int(v) for v in roi))
        if not self.scale_factor_mm_per_px > 0:
            raise ConfigError("scale_factor_mm_per_px must be positive")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["optimizer"]["fd_epsilon"] = list(self.optimizer.fd_epsilon)
        if self.roi is not None:
            out["roi"] = list(self.roi)
        return out

    def replace(self, **changes) -> "PipelineConfig":
        """Copy with top-level or ``section.key`` overrides; ``None`` values are ignored."""
        data = self.to_dict()
        for key, value in changes.items():
            if value is None:
                continue
            section, _, name = key.rpartition(".")
            target = data[section] if section else data
            if name not in target:
                raise ConfigError(f"unknown config key {key!r}")
            target[name] = value
        return config_from_dict(data)


def _build(cls, values, where):
    if not isinstance(values, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid {where}: {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    values = dict(data)
    for name, cls in _SECTIONS.items():
        if name in values:
            section = dict(values[name]) if isinstance(values[name], dict) else values[name]
            if name == "optimizer" and isinstance(section, dict) and "fd_epsilon" in section:
                section["fd_epsilon"] = tuple(section["fd_epsilon"])
            values[name] = _build(cls, section, name)
    return _build(PipelineConfig, values, "config")


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
