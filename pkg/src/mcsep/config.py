"""Pipeline configuration: a YAML document with full defaulting.

Every section is optional; omitted keys take the defaults below, which give
the 257-bin, 32 ms / 16 ms Hann STFT, the 15-mic array and the nine
microphone pairs.  Unknown keys anywhere are rejected.

Example::

    seed: 7
    stft: {fft_size: 512, hop_length: 256}
    separation: {method: mvdr, mask_source: oracle}
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import yaml

from .features import DEFAULT_PAIRS, validate_pairs
from .room import ABSORPTION_MODELS, DEFAULT_GAPS_CM, ArrayGeometry, SceneRanges
from .separation import MASK_SOURCES, METHODS, SeparationSettings
from .spectral import StftConfig

__all__ = ["ConfigError", "GeometryConfig", "SimulationConfig", "SeparationConfig",
           "OutputConfig", "PipelineConfig", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeometryConfig:
    gaps_cm: tuple[float, ...] = DEFAULT_GAPS_CM
    mic_positions: tuple[tuple[float, float, float], ...] | None = None
    reference_index: int = 0

    def build(self) -> ArrayGeometry:
        if self.mic_positions is not None:
            return ArrayGeometry(self.mic_positions, self.reference_index)
        return ArrayGeometry.from_gaps(self.gaps_cm, self.reference_index)


@dataclass(frozen=True)
class SimulationConfig:
    ranges: SceneRanges = field(default_factory=SceneRanges)
    duration: tuple[float, float] = (2.0, 3.0)
    max_order: int | None = None
    absorption_model: str = "calibrated"
    source_dir: str | None = None
    preset: str | None = None
    wav_encoding: str = "float32"


@dataclass(frozen=True)
class SeparationConfig:
    method: str = "mvdr"
    mask_source: str = "oracle"
    crm_bound: float | None = 10.0
    af_threshold: float = 0.5
    loading: float = 1e-6


@dataclass(frozen=True)
class OutputConfig:
    simulate_dir: str | None = None
    separate_dir: str | None = None
    report_path: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    sample_rate: int = 16000
    stft: StftConfig = field(default_factory=StftConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    pairs: tuple[tuple[int, int], ...] = DEFAULT_PAIRS
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    separation: SeparationConfig = field(default_factory=SeparationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    jobs: int | None = None

    def __post_init__(self):
        sep = self.separation
        if sep.method not in METHODS:
            raise ConfigError(f"separation.method must be one of {METHODS}, got {sep.method!r}")
        if sep.mask_source not in MASK_SOURCES:
            raise ConfigError(f"separation.mask_source must be one of {MASK_SOURCES}")
        if not -1.0 <= sep.af_threshold <= 1.0:
            raise ConfigError("separation.af_threshold must lie in [-1, 1]")
        if sep.loading < 0:
            raise ConfigError("separation.loading must be non-negative")
        if sep.crm_bound is not None and sep.crm_bound <= 0:
            raise ConfigError("separation.crm_bound must be positive")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        sim = self.simulation
        if sim.absorption_model not in ABSORPTION_MODELS:
            raise ConfigError(f"simulation.absorption_model must be one of {ABSORPTION_MODELS}")
        if sim.wav_encoding not in ("float32", "pcm16"):
            raise ConfigError("simulation.wav_encoding must be float32 or pcm16")
        lo, hi = sim.duration
        if not 0 < lo <= hi:
            raise ConfigError("simulation.duration must be a non-empty positive range")
        try:
            geometry = self.geometry.build()
            validate_pairs(self.pairs, geometry.num_mics)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_geometry(self) -> ArrayGeometry:
        return self.geometry.build()

    def separation_settings(self) -> SeparationSettings:
        s = self.separation
        return SeparationSettings(stft=self.stft, crm_bound=s.crm_bound,
                                  af_threshold=s.af_threshold, loading=s.loading,
                                  reference_index=self.geometry.reference_index,
                                  pairs=self.pairs,
                                  speed_of_sound=self.simulation.ranges.speed_of_sound)

    def to_dict(self) -> dict:
        return _plain(self)

    def fingerprint(self) -> str:
        """sha256 of the canonical JSON of every field except output paths and ``jobs``."""
        d = self.to_dict()
        d.pop("output")
        d.pop("jobs")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_overrides(self, **sections) -> "PipelineConfig":
        """Copy with nested overrides, e.g. ``separation={"method": "tf_mask"}``."""
        d = self.to_dict()
        for key, value in sections.items():
            if isinstance(value, dict) and isinstance(d.get(key), dict):
                d[key] = _merge(d[key], value)
            else:
                d[key] = value
        return PipelineConfig.from_dict(d)

    @classmethod
    def from_dict(cls, d: dict | None) -> "PipelineConfig":
        try:
            return _build(cls, d or {}, "")
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    return obj


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


_NESTED = {
    (PipelineConfig, "stft"): StftConfig,
    (PipelineConfig, "geometry"): GeometryConfig,
    (PipelineConfig, "simulation"): SimulationConfig,
    (PipelineConfig, "separation"): SeparationConfig,
    (PipelineConfig, "output"): OutputConfig,
    (SimulationConfig, "ranges"): SceneRanges,
}


def _build(cls, d, path: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping, got {type(d).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        where = f" in {path}" if path else ""
        raise ConfigError(f"unknown config key(s){where}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in d.items():
        sub = _NESTED.get((cls, key))
        kwargs[key] = _build(sub, value, f"{path}{key}.") if sub else _tupled(value)
    return cls(**kwargs)


def load_config(path: str | os.PathLike | None = None) -> PipelineConfig:
    """Read a YAML config; ``None`` gives the defaults."""
    if path is None:
        return PipelineConfig()
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    return PipelineConfig.from_dict(data)
