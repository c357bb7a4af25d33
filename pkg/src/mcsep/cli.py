"""Command-line pipeline: ``mcsep simulate | separate | evaluate | features``.

Exit codes: 0 success, 1 configuration or usage error, 2 partial failure
(some utterances failed or, for ``evaluate``, outputs were missing).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import corpus
from .config import ConfigError, PipelineConfig, load_config
from .features import angle_feature, ipd, steering_vector
from .masking import oracle_crm
from .metrics import evaluate
from .separation import MASK_SOURCES, METHODS, separate
from .spectral import MultiChannelWaveform, stft
from .tensorfile import write_tensor
from .wavio import write_wav

__all__ = ["main", "cmd_simulate", "cmd_separate", "cmd_evaluate", "cmd_features",
           "EXIT_OK", "EXIT_USAGE", "EXIT_PARTIAL"]

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2
log = logging.getLogger("mcsep")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _map(fn, tasks: list, jobs: int | None) -> list:
    """Run ``fn`` over ``tasks`` in order, in-process for a single job."""
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _out_dir(path, fallback, what: str) -> Path:
    path = path or fallback
    if path is None:
        raise UsageError(f"no {what} directory given (flag or config output section)")
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise UsageError(f"{path} is not writable")
    return path


# -- simulate ----------------------------------------------------------------

def _simulate_one(task):
    cfg, index, preset, out_dir = task
    uid = corpus.utterance_id(index)
    scene, bundle = corpus.simulate_utterance(cfg, index, preset)
    paths = corpus.write_utterance(Path(out_dir), uid, bundle, cfg.simulation.wav_encoding)
    return corpus.manifest_entry(uid, scene, paths)


def cmd_simulate(config: PipelineConfig, count: int, out_dir) -> Path:
    """Simulate ``count`` utterances; returns the manifest path."""
    if count < 1:
        raise UsageError("count must be at least 1")
    out = _out_dir(out_dir, config.output.simulate_dir, "simulation output")
    preset = corpus.load_preset(config.simulation.preset) if config.simulation.preset else None
    tasks = [(config, k, preset, str(out)) for k in range(count)]
    entries = _map(_simulate_one, tasks, config.jobs)
    manifest_path = out / "manifest.json"
    corpus.write_manifest(manifest_path, master_seed=config.seed, sample_rate=config.sample_rate,
                          geometry=config.build_geometry(), fingerprint=config.fingerprint(),
                          utterances=entries, preset=config.simulation.preset)
    return manifest_path


# -- separate ----------------------------------------------------------------

def _separate_one(task):
    cfg, manifest_path, entry, geometry, out_dir, mask_dir, filter_dir = task
    sep = cfg.separation
    uid = entry["id"]
    start = time.perf_counter()
    try:
        keys = ["mixture"]
        if sep.mask_source == "oracle" and sep.method in ("tf_mask", "mvdr", "filter_sum"):
            keys += ["target", "interferer"]
        stems = corpus.load_stems(manifest_path, entry, keys)
        mask_files = None
        if mask_dir is not None:
            mask_files = {k: str(Path(mask_dir) / f"{uid}_{k}_mask.tensor")
                          for k in ("target", "noise")}
        filter_file = None
        if filter_dir is not None and (Path(filter_dir) / f"{uid}_filter.tensor").exists():
            filter_file = Path(filter_dir) / f"{uid}_filter.tensor"
        out = separate(stems["mixture"], sep.method, sep.mask_source, geometry=geometry,
                       doa_deg=entry["doa_deg"], target=stems.get("target"),
                       interferer=stems.get("interferer"), mask_files=mask_files,
                       filter_file=filter_file, settings=cfg.separation_settings())
        write_wav(Path(out_dir) / f"{uid}.wav", out)
        status, error = "ok", None
    except Exception as exc:  # per-utterance failures are logged, not fatal
        status, error = "failed", f"{type(exc).__name__}: {exc}"
    return {"id": uid, "status": status, "error": error,
            "seconds": round(time.perf_counter() - start, 4)}


def cmd_separate(config: PipelineConfig, manifest_path, out_dir, mask_dir=None,
                 filter_dir=None) -> tuple[list[dict], Path]:
    """Separate every utterance in the manifest; returns per-utterance records and the run log path."""
    manifest = corpus.load_manifest(manifest_path)
    geometry = corpus.manifest_geometry(manifest)
    out = _out_dir(out_dir, config.output.separate_dir, "separation output")
    if config.separation.mask_source == "file" and mask_dir is None:
        raise UsageError("mask_source=file needs --mask-dir")
    tasks = [(config, str(manifest_path), e, geometry, str(out),
              None if mask_dir is None else str(mask_dir),
              None if filter_dir is None else str(filter_dir))
             for e in manifest["utterances"]]
    records = _map(_separate_one, tasks, config.jobs)
    for r in records:
        if r["status"] != "ok":
            log.warning("utterance %s failed: %s", r["id"], r["error"])
    run_log = out / "run_log.json"
    run_log.write_text(json.dumps({
        "config_fingerprint": config.fingerprint(),
        "method": config.separation.method,
        "mask_source": config.separation.mask_source,
        "manifest": str(manifest_path),
        "failed": [r["id"] for r in records if r["status"] != "ok"],
        "utterances": records,
    }, indent=2, sort_keys=True) + "\n")
    return records, run_log


# -- evaluate ----------------------------------------------------------------

def cmd_evaluate(config: PipelineConfig, manifest_path, separated_dir, report_path=None):
    report = evaluate(manifest_path, separated_dir, config.geometry.reference_index)
    corpus.validate_report(report.to_dict())
    report_path = report_path or config.output.report_path
    if report_path is not None:
        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        Path(report_path).write_text(report.to_json())
    return report


# -- features ----------------------------------------------------------------

def _features_one(task):
    cfg, manifest_path, entry, geometry, out_dir, with_masks = task
    uid = entry["id"]
    keys = ["mixture", "target", "interferer"] if with_masks else ["mixture"]
    stems = corpus.load_stems(manifest_path, entry, keys)
    spec = stft(stems["mixture"], cfg.stft)
    settings = cfg.separation_settings()
    out = Path(out_dir)
    write_tensor(out / f"{uid}_ipd.tensor", ipd(spec, cfg.pairs).values)
    steer = steering_vector(geometry, entry["doa_deg"], cfg.stft, spec.sample_rate,
                            settings.speed_of_sound)
    write_tensor(out / f"{uid}_af.tensor", angle_feature(spec, steer, cfg.pairs).values)
    if with_masks:
        ref = settings.reference_index
        x_ref = spec.channel(ref)
        for key, stem in (("target", "target"), ("noise", "interferer")):
            s_ref = stft(MultiChannelWaveform(stems[stem].samples[ref:ref + 1],
                                              stems[stem].sample_rate), cfg.stft)
            write_tensor(out / f"{uid}_{key}_mask.tensor",
                         oracle_crm(s_ref, x_ref, settings.crm_bound).values)
    return uid


def cmd_features(config: PipelineConfig, manifest_path, out_dir, masks: bool = False) -> list[str]:
    """Write IPD ``[pairs, frames, bins]`` and AF ``[frames, bins]`` tensors per utterance,
    plus oracle target/noise masks with ``masks=True``."""
    manifest = corpus.load_manifest(manifest_path)
    geometry = corpus.manifest_geometry(manifest)
    out = _out_dir(out_dir, None, "feature output")
    tasks = [(config, str(manifest_path), e, geometry, str(out), masks)
             for e in manifest["utterances"]]
    return _map(_features_one, tasks, config.jobs)


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--jobs", type=int, help="parallel utterances (default: all cores)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="mcsep", description="Multi-channel target speaker separation pipeline.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="simulate a two-speaker corpus")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--out", help="output directory")
    s.add_argument("--preset", help="scene preset name or JSON file (e.g. replay_doa)")

    s = sub.add_parser("separate", parents=[common], help="separate every manifest utterance")
    s.add_argument("--manifest", required=True)
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--mask-source", choices=MASK_SOURCES)
    s.add_argument("--mask-dir", help="directory of <id>_{target,noise}_mask.tensor files")
    s.add_argument("--filter-dir", help="directory of <id>_filter.tensor time-variant filters")
    s.add_argument("--out", help="output directory")

    s = sub.add_parser("evaluate", parents=[common], help="score separated outputs")
    s.add_argument("--manifest", required=True)
    s.add_argument("--separated", required=True)
    s.add_argument("--report", help="JSON report path")

    s = sub.add_parser("features", parents=[common], help="export IPD / AF tensors")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--masks", action="store_true", help="also write oracle CRM tensors")
    return p


def _configure(args) -> PipelineConfig:
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.jobs is not None:
        over["jobs"] = args.jobs
    sep = {k: v for k, v in (("method", getattr(args, "method", None)),
                             ("mask_source", getattr(args, "mask_source", None))) if v}
    if sep:
        over["separation"] = sep
    if getattr(args, "preset", None):
        over["simulation"] = {"preset": args.preset}
    return cfg.with_overrides(**over) if over else cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _configure(args)
        if args.command == "simulate":
            print(cmd_simulate(cfg, args.count, args.out))
            return EXIT_OK
        if args.command == "separate":
            records, run_log = cmd_separate(cfg, args.manifest, args.out, args.mask_dir,
                                            args.filter_dir)
            failed = sum(r["status"] != "ok" for r in records)
            print(f"{len(records) - failed}/{len(records)} separated; log {run_log}")
            return EXIT_PARTIAL if failed else EXIT_OK
        if args.command == "evaluate":
            report = cmd_evaluate(cfg, args.manifest, args.separated, args.report)
            print(report.table())
            return EXIT_OK if report.complete else EXIT_PARTIAL
        n = len(cmd_features(cfg, args.manifest, args.out, args.masks))
        print(f"features written for {n} utterances")
        return EXIT_OK
    except (ConfigError, UsageError, corpus.ManifestError) as exc:
        print(f"mcsep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
