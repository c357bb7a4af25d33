"""Scale-invariant SNR and corpus-level evaluation."""
from __future__ import annotations

import json
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import MultiChannelWaveform

__all__ = ["SI_SNR_CAP_DB", "SiSnrResult", "EvalReport", "si_snr", "si_snr_loss",
           "evaluate", "ZeroReferenceError", "REPORT_SCHEMA_VERSION"]

SI_SNR_CAP_DB = 80.0
REPORT_SCHEMA_VERSION = 1


class ZeroReferenceError(ValueError):
    pass


@dataclass(frozen=True)
class SiSnrResult:
    value_db: float
    scale_factor: float


def _as_1d(x, name: str) -> np.ndarray:
    if isinstance(x, MultiChannelWaveform):
        if x.num_channels != 1:
            raise ValueError(f"{name} must be single-channel, got {x.num_channels} channels")
        return x.samples[0]
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 2 and a.shape[0] == 1:
        a = a[0]
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return a


def si_snr(estimate, reference, cap_db: float = SI_SNR_CAP_DB) -> SiSnrResult:
    """Zero-mean, projection-based SI-SNR of ``estimate`` against ``reference``.

    Not symmetric in its arguments.  Clamped to ``[-cap_db, cap_db]``.
    """
    est = _as_1d(estimate, "estimate")
    ref = _as_1d(reference, "reference")
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: estimate {est.shape[0]} vs reference {ref.shape[0]}")
    est = est - est.mean()
    ref = ref - ref.mean()
    ref_energy = ref @ ref
    if ref_energy == 0.0:
        raise ZeroReferenceError("reference signal is identically zero")
    alpha = (est @ ref) / ref_energy
    target = alpha * ref
    residual = est - target
    t_energy = target @ target
    r_energy = residual @ residual
    if t_energy == 0.0:
        return SiSnrResult(-cap_db, float(alpha))
    if r_energy == 0.0:
        return SiSnrResult(cap_db, float(alpha))
    value = 10.0 * np.log10(t_energy / r_energy)
    return SiSnrResult(float(np.clip(value, -cap_db, cap_db)), float(alpha))


def si_snr_loss(estimate, reference) -> float:
    """Negative SI-SNR, the separation term of a multi-task training objective."""
    return -si_snr(estimate, reference).value_db


@dataclass
class EvalReport:
    utterances: list[dict]
    method: str | None = None
    config_fingerprint: str | None = None
    missing: list[str] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missing

    def summary(self) -> dict:
        out = {}
        for key in ("si_snr_in", "si_snr_out", "delta"):
            vals = [u[key] for u in self.utterances]
            if vals:
                out[key] = {"mean": statistics.fmean(vals), "median": statistics.median(vals),
                            "std": statistics.pstdev(vals)}
            else:
                out[key] = {"mean": None, "median": None, "std": None}
        out["count"] = len(self.utterances)
        return out

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "method": self.method,
            "config_fingerprint": self.config_fingerprint,
            "complete": self.complete,
            "missing": sorted(self.missing),
            "utterances": self.utterances,
            "summary": self.summary(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        lines = [f"{'id':<16}{'in (dB)':>10}{'out (dB)':>10}{'delta':>10}"]
        for u in self.utterances:
            lines.append(f"{u['id']:<16}{u['si_snr_in']:>10.2f}{u['si_snr_out']:>10.2f}{u['delta']:>10.2f}")
        s = self.summary()
        if s["count"]:
            lines.append(f"{'mean':<16}{s['si_snr_in']['mean']:>10.2f}"
                         f"{s['si_snr_out']['mean']:>10.2f}{s['delta']['mean']:>10.2f}")
        if self.missing:
            lines.append(f"missing: {', '.join(sorted(self.missing))}")
        return "\n".join(lines)


def evaluate(manifest_path: str | os.PathLike, separated_dir: str | os.PathLike,
             reference_index: int = 0) -> EvalReport:
    """Score ``<separated_dir>/<id>.wav`` against each utterance's reverberant target
    on the reference channel.  Missing or unreadable outputs are listed, not fatal."""
    from .corpus import load_manifest, resolve
    from .wavio import WavError, read_wav

    manifest_path = Path(manifest_path)
    separated_dir = Path(separated_dir)
    manifest = load_manifest(manifest_path)
    method = fingerprint = None
    run_log = separated_dir / "run_log.json"
    if run_log.exists():
        log = json.loads(run_log.read_text())
        method = log.get("method")
        fingerprint = log.get("config_fingerprint")

    rows, missing = [], []
    for utt in manifest["utterances"]:
        out_path = separated_dir / f"{utt['id']}.wav"
        try:
            estimate = read_wav(out_path)
        except (OSError, WavError):
            missing.append(utt["id"])
            continue
        mixture = read_wav(resolve(manifest_path, utt["paths"]["mixture"]))
        target = read_wav(resolve(manifest_path, utt["paths"]["target"]))
        ref = target.samples[reference_index]
        if estimate.num_samples != len(ref):
            missing.append(utt["id"])
            continue
        s_in = si_snr(mixture.samples[reference_index], ref).value_db
        s_out = si_snr(estimate.samples[0], ref).value_db
        rows.append({"id": utt["id"], "si_snr_in": s_in, "si_snr_out": s_out, "delta": s_out - s_in})
    return EvalReport(rows, method, fingerprint, missing)
