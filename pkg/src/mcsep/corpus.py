"""Simulated corpora: per-utterance generation, manifests and scene presets."""
from __future__ import annotations

import dataclasses
import json
import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .room import (
    ArrayGeometry,
    MixtureBundle,
    RoomSpec,
    SceneSpec,
    sample_scene,
    scene_from_doas,
    synthesize_mixture,
)
from .sources import load_source_pool, speech_like
from .spectral import MultiChannelWaveform
from .wavio import read_wav, write_wav

__all__ = ["MANIFEST_SCHEMA_VERSION", "ManifestError", "utterance_seed", "utterance_id",
           "load_preset", "simulate_utterance", "write_manifest", "load_manifest", "resolve",
           "schema", "validate_report"]

MANIFEST_SCHEMA_VERSION = 1
SEED_STRIDE = 100_000


class ManifestError(ValueError):
    pass


def utterance_seed(master_seed: int, index: int) -> int:
    """Counter-derived seed; master seed 0 gives scene seeds 0, 1, 2, ..."""
    if not 0 <= index < SEED_STRIDE:
        raise ValueError(f"utterance index {index} outside [0, {SEED_STRIDE})")
    return master_seed * SEED_STRIDE + index


def utterance_id(index: int) -> str:
    return f"utt{index:05d}"


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    """Published JSON schema: ``"manifest"`` or ``"report"``."""
    text = resources.files("mcsep").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def load_preset(name_or_path: str) -> dict:
    """Scene preset by bundled name (``replay_doa``) or JSON file path."""
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    else:
        res = resources.files("mcsep").joinpath("presets", f"{name_or_path}.json")
        if not res.is_file():
            raise ValueError(f"unknown scene preset {name_or_path!r}")
        text = res.read_text()
    preset = json.loads(text)
    for key in ("room", "array_center", "array_azimuth", "distance", "doa_pairs"):
        if key not in preset:
            raise ValueError(f"preset {name_or_path!r} lacks {key!r}")
    return preset


def _preset_scene(preset: dict, index: int, seed: int, rng, ranges, geometry) -> SceneSpec:
    room = preset["room"]
    room = RoomSpec(tuple(room["dimensions"]), room["t60"], room.get("speed_of_sound", 343.0))
    target_doa, interferer_doa = preset["doa_pairs"][index % len(preset["doa_pairs"])]
    distances = tuple(float(rng.uniform(*preset["distance"])) for _ in range(2))
    return scene_from_doas(
        target_doa, interferer_doa, room=room, array_center=preset["array_center"],
        array_azimuth=preset["array_azimuth"], distances=distances,
        sir_db=float(rng.choice(np.asarray(ranges.sir_choices, dtype=np.float64))),
        overlap_ratio=float(rng.uniform(*ranges.overlap)), placement=float(rng.uniform()),
        geometry=geometry, seed=seed)


def _pick_sources(rng, scene: SceneSpec, sim, sample_rate: int, pool):
    lo, hi = sim.duration
    if pool is None:
        seconds = rng.uniform(lo, hi)
        target = speech_like(rng, seconds, sample_rate)
        # long enough for the requested overlap, plus a few samples of slack
        needed = scene.overlap_ratio * seconds + 0.01
        interferer = speech_like(rng, max(rng.uniform(lo, hi), needed), sample_rate)
        return target, interferer
    for _ in range(100):
        i, j = rng.choice(len(pool), size=2, replace=False)
        target, interferer = read_wav(pool[i]), read_wav(pool[j])
        if target.num_channels != 1 or interferer.num_channels != 1:
            raise ValueError("source pool WAVs must be mono")
        if interferer.num_samples >= round(scene.overlap_ratio * target.num_samples):
            return target, interferer
    raise ValueError("no interferer in the source pool is long enough for the overlap ratio")


def simulate_utterance(cfg, index: int, preset: dict | None = None,
                       geometry: ArrayGeometry | None = None) -> tuple[SceneSpec, MixtureBundle]:
    """Scene and mixture for utterance ``index`` of a corpus generated with ``cfg``
    (a :class:`mcsep.config.PipelineConfig`)."""
    sim = cfg.simulation
    geometry = cfg.build_geometry() if geometry is None else geometry
    seed = utterance_seed(cfg.seed, index)
    if preset is None:
        scene = sample_scene(seed, sim.ranges, geometry)
    else:
        scene = _preset_scene(preset, index, seed, np.random.default_rng([seed, 2]),
                              sim.ranges, geometry)
    if scene.room.absorption_model != sim.absorption_model:
        scene = dataclasses.replace(
            scene, room=dataclasses.replace(scene.room, absorption_model=sim.absorption_model))
    pool = load_source_pool(sim.source_dir, cfg.sample_rate) if sim.source_dir else None
    target, interferer = _pick_sources(np.random.default_rng([seed, 1]), scene, sim,
                                       cfg.sample_rate, pool)
    return scene, synthesize_mixture(scene, target, interferer, geometry, sim.max_order)


def write_utterance(out_dir: Path, uid: str, bundle: MixtureBundle,
                    encoding: str = "float32") -> dict:
    """Write the three WAVs; returns their paths relative to ``out_dir``."""
    paths = {"mixture": f"wav/{uid}_mixture.wav", "target": f"wav/{uid}_target.wav",
             "interferer": f"wav/{uid}_interferer.wav"}
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    waves = {"mixture": bundle.mixture, "target": bundle.target_reverberant,
             "interferer": bundle.interferer_reverberant}
    for key, rel in paths.items():
        write_wav(out_dir / rel, waves[key], encoding)
    return paths


def manifest_entry(uid: str, scene: SceneSpec, paths: dict) -> dict:
    return {"id": uid, "scene": scene.to_dict(), "paths": paths,
            "doa_deg": scene.target_doa_deg}


def write_manifest(path: str | os.PathLike, *, master_seed: int, sample_rate: int,
                   geometry: ArrayGeometry, fingerprint: str, utterances: list[dict],
                   preset: str | None = None) -> dict:
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "master_seed": master_seed,
        "sample_rate": sample_rate,
        "geometry": geometry.to_dict(),
        "config_fingerprint": fingerprint,
        "preset": preset,
        "utterances": sorted(utterances, key=lambda u: u["id"]),
    }
    jsonschema.validate(manifest, schema("manifest"))
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_manifest(path: str | os.PathLike) -> dict:
    try:
        manifest = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(manifest, schema("manifest"))
    except jsonschema.ValidationError as exc:
        raise ManifestError(f"manifest {path} fails schema validation: {exc.message}") from exc
    return manifest


def validate_report(report: dict) -> None:
    jsonschema.validate(report, schema("report"))


def resolve(manifest_path: str | os.PathLike, relative: str) -> Path:
    """Manifest paths are relative to the manifest's directory."""
    return Path(manifest_path).parent / relative


def manifest_geometry(manifest: dict) -> ArrayGeometry:
    g = manifest["geometry"]
    return ArrayGeometry(g["mic_positions_relative"], g["reference_index"])


def load_stems(manifest_path, entry: dict, keys=("mixture", "target", "interferer")
               ) -> dict[str, MultiChannelWaveform]:
    return {k: read_wav(resolve(manifest_path, entry["paths"][k])) for k in keys}
