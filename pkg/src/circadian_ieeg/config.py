"""Pipeline configuration: every tunable, JSON round trip and a stable hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .events import SequenceConfig
from .hfo import HfoConfig
from .preprocess import BadChannelThresholds
from .sleep import SleepConfig
from .spikes import SpikeConfig
from .synth import SynthConfig

__all__ = ["CONFIG_VERSION", "CircadianConfig", "SozConfig", "PipelineConfig", "load_config"]

CONFIG_VERSION = 1


@dataclass(frozen=True)
class CircadianConfig:
    n_bins: int = 144


@dataclass(frozen=True)
class SozConfig:
    # "all": every analyzed minute; "sleep-hour": predicted-sleep time inside
    # the window starting at the first local midnight.
    selection: str = "all"
    window_start_tod_s: float = 0.0
    window_s: float = 3600.0


@dataclass(frozen=True)
class PipelineConfig:
    version: int = CONFIG_VERSION
    block_s: float = 600.0
    min_block_s: float = 2.0
    spike: SpikeConfig = field(default_factory=SpikeConfig)
    hfo: HfoConfig = field(default_factory=HfoConfig)
    sequence: SequenceConfig = field(default_factory=SequenceConfig)
    phfo_window_ms: float = 60.0
    bad_channels: BadChannelThresholds = field(default_factory=BadChannelThresholds)
    sleep: SleepConfig = field(default_factory=SleepConfig)
    circadian: CircadianConfig = field(default_factory=CircadianConfig)
    soz: SozConfig = field(default_factory=SozConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    n_jobs: int = 1

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if not self.block_s > 0:
            raise ConfigError("block_s must be positive")
        if self.hfo.baseline_scope not in ("per-block", "whole-recording"):
            raise ConfigError(f"unknown HFO baseline scope {self.hfo.baseline_scope!r}")
        if self.soz.selection not in ("all", "sleep-hour"):
            raise ConfigError(f"unknown SOZ selection {self.soz.selection!r}")
        if self.sleep.normalization not in ("minmax", "zscore"):
            raise ConfigError(f"unknown ADR normalization {self.sleep.normalization!r}")
        if self.phfo_window_ms < 0 or self.n_jobs < 1:
            raise ConfigError("phfo_window_ms must be >= 0 and n_jobs >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def hash(self) -> str:
        d = self.to_dict()
        d.pop("n_jobs")  # execution detail; results do not depend on it
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        try:
            return _build(cls, d)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _coerce(tp, value):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"expected a mapping for {tp.__name__}")
        return _build(tp, value)
    if origin is tuple and isinstance(value, (list, tuple)):
        args = typing.get_args(tp)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(args[0], v) for v in value)
        return tuple(value)
    if origin in (typing.Union, types.UnionType):
        if value is None:
            return None
        for arg in typing.get_args(tp):
            if arg is not type(None):
                return _coerce(arg, value)
    return value


def _build(cls, d: dict):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {k: _coerce(hints[k], v) for k, v in d.items()}
    return cls(**kwargs)


def load_config(path=None) -> PipelineConfig:
    """Read a JSON config; missing keys take their defaults."""
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return PipelineConfig.from_dict(data)
