"""Mask-based PSD estimation, MVDR / delay-and-sum weights and their application.

Shapes: PSDs ``[bins, ch, ch]``, time-invariant weights ``[bins, ch]``,
time-variant weights ``[frames, bins, ch]``.

Time-invariant weights are applied as ``W(f)^H X(t, f)``.  Time-variant
(filter-and-sum) weights are applied as the plain sum ``sum_r W_r(t, f) X_r(t, f)``
without conjugation; :meth:`BeamformerWeights.broadcast` conjugates when it
turns a fixed beamformer into per-frame filters so both paths agree.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .features import SteeringVector
from .masking import ComplexMask
from .spectral import ComplexSpectrogram

__all__ = [
    "PsdSet",
    "BeamformerWeights",
    "SingularPsdError",
    "DegenerateSpeechPsdError",
    "estimate_psd",
    "mvdr_from_steering",
    "mvdr_from_psd",
    "delay_and_sum",
    "apply_weights",
    "residual_diagnostics",
    "DEFAULT_LOADING",
]

DEFAULT_LOADING = 1e-6
_DENOMINATOR_FLOOR = 1e-10
TIME_INVARIANT = "time_invariant"
TIME_VARIANT = "time_variant"


class SingularPsdError(np.linalg.LinAlgError):
    def __init__(self, frequency_index: int, message: str = ""):
        self.frequency_index = frequency_index
        super().__init__(message or f"noise PSD is singular at frequency bin {frequency_index} "
                                    "even after diagonal loading")


class DegenerateSpeechPsdError(ValueError):
    def __init__(self, frequency_index: int):
        self.frequency_index = frequency_index
        super().__init__(f"degenerate speech PSD: trace(inv(Phi_n) Phi_y) ~ 0 at bin {frequency_index}")


@dataclass(frozen=True)
class PsdSet:
    matrices: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        phi = np.asarray(self.matrices, dtype=np.complex128)
        if phi.ndim != 3 or phi.shape[1] != phi.shape[2]:
            raise ValueError(f"PSD set must be [bins, ch, ch], got {phi.shape}")
        object.__setattr__(self, "matrices", phi)
        if self.degenerate is None:
            object.__setattr__(self, "degenerate", np.zeros(phi.shape[0], dtype=bool))

    @property
    def num_bins(self) -> int:
        return self.matrices.shape[0]

    @property
    def num_channels(self) -> int:
        return self.matrices.shape[1]

    def check(self, herm_tol: float = 1e-12, psd_tol: float = 1e-9) -> None:
        """Raise if any matrix is not Hermitian or has a clearly negative eigenvalue.

        ``psd_tol`` is scaled by each matrix's largest eigenvalue (at least 1).
        """
        phi = self.matrices
        scale = np.maximum(1.0, np.max(np.abs(phi), axis=(1, 2)))
        herm = np.max(np.abs(phi - np.conj(np.swapaxes(phi, 1, 2))), axis=(1, 2))
        if np.any(herm > herm_tol * scale):
            raise ValueError(f"PSD not Hermitian at bins {np.nonzero(herm > herm_tol * scale)[0]}")
        eig = np.linalg.eigvalsh(phi)
        bad = eig[:, 0] < -psd_tol * np.maximum(1.0, eig[:, -1])
        if np.any(bad):
            raise ValueError(f"PSD has negative eigenvalues at bins {np.nonzero(bad)[0]}")


@dataclass(frozen=True)
class BeamformerWeights:
    values: np.ndarray
    kind: str = TIME_INVARIANT
    reference_index: int = 0
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        w = np.asarray(self.values, dtype=np.complex128)
        expected = {TIME_INVARIANT: 2, TIME_VARIANT: 3}
        if self.kind not in expected:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if w.ndim != expected[self.kind]:
            raise ValueError(f"{self.kind} weights need {expected[self.kind]} dims, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("beamformer weights contain non-finite values")
        object.__setattr__(self, "values", w)

    @property
    def num_channels(self) -> int:
        return self.values.shape[-1]

    def broadcast(self, num_frames: int) -> "BeamformerWeights":
        """Per-frame filters reproducing ``W^H X`` under the unconjugated sum."""
        if self.kind == TIME_VARIANT:
            return self
        w = np.broadcast_to(np.conj(self.values)[None], (num_frames,) + self.values.shape)
        return BeamformerWeights(w.copy(), TIME_VARIANT, self.reference_index)


def _mask_values(mask: ComplexMask | np.ndarray) -> np.ndarray:
    return mask.values if isinstance(mask, ComplexMask) else np.asarray(mask)


def estimate_psd(spec: ComplexSpectrogram, mask: ComplexMask | np.ndarray) -> PsdSet:
    """Mask-weighted spatial covariance per frequency.

    ``sum_t (M X)(M X)^H / sum_t |M|^2`` with the mask broadcast over channels;
    the denominator is floored at 1e-10 and such bins are flagged.
    """
    m = _mask_values(mask)
    x = spec.data
    if m.shape != x.shape[1:]:
        raise ValueError(f"mask shape {m.shape} does not match spectrogram frames/bins {x.shape[1:]}")
    mx = m[None] * x
    num = np.einsum("ctf,dtf->fcd", mx, np.conj(mx))
    den = np.sum(np.abs(m) ** 2, axis=0)
    degenerate = den < _DENOMINATOR_FLOOR
    phi = num / np.maximum(den, _DENOMINATOR_FLOOR)[:, None, None]
    phi = 0.5 * (phi + np.conj(np.swapaxes(phi, 1, 2)))
    psd = PsdSet(phi, degenerate)
    psd.check()
    return psd


def _load(phi: np.ndarray, loading: float) -> np.ndarray:
    r = phi.shape[-1]
    mean_diag = np.real(np.trace(phi)) / r
    return phi + loading * mean_diag * np.eye(r)


def _hermitian_solve(a: np.ndarray, b: np.ndarray, f: int) -> np.ndarray:
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(a, lower=True), b)
    except np.linalg.LinAlgError:
        pass
    # indefinite after loading: symmetric-indefinite (LDL) solve
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            x = scipy.linalg.solve(a, b, assume_a="her")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError) as exc:
        raise SingularPsdError(f) from exc
    if not np.all(np.isfinite(x)):
        raise SingularPsdError(f)
    return x


def mvdr_from_steering(psd_noise: PsdSet, steering: SteeringVector,
                       loading: float = DEFAULT_LOADING, reference_index: int = 0) -> BeamformerWeights:
    """``Phi_n^{-1} G / (G^H Phi_n^{-1} G)`` per bin, with ``Phi_n`` diagonally loaded
    by ``loading * trace(Phi_n) / R``."""
    g = steering.values.T  # [bins, ch]
    if g.shape != psd_noise.matrices.shape[:2]:
        raise ValueError(f"steering {g.shape} does not match PSD {psd_noise.matrices.shape}")
    w = np.empty_like(g)
    for f in range(psd_noise.num_bins):
        num = _hermitian_solve(_load(psd_noise.matrices[f], loading), g[f], f)
        den = np.vdot(g[f], num)
        if abs(den) == 0.0 or not np.isfinite(den):
            raise SingularPsdError(f, f"G^H inv(Phi_n) G vanishes at bin {f}")
        w[f] = num / den
    return BeamformerWeights(w, TIME_INVARIANT, reference_index)


def mvdr_from_psd(psd_speech: PsdSet, psd_noise: PsdSet, reference_index: int = 0,
                  loading: float = DEFAULT_LOADING, fallback: bool = False) -> BeamformerWeights:
    """``Phi_n^{-1} Phi_y / trace(Phi_n^{-1} Phi_y) u_r`` per bin (reference column ``r``).

    With ``fallback=True`` a bin whose noise PSD is singular passes the
    reference channel through and a bin with a degenerate speech PSD is
    zeroed, instead of raising; the affected bins are listed in
    ``diagnostics``.
    """
    if psd_speech.matrices.shape != psd_noise.matrices.shape:
        raise ValueError("speech and noise PSD shapes differ")
    r = psd_noise.num_channels
    if not 0 <= reference_index < r:
        raise ValueError(f"reference_index {reference_index} out of range for {r} channels")
    w = np.zeros(psd_noise.matrices.shape[:2], dtype=np.complex128)
    singular, degenerate = [], []
    for f in range(psd_noise.num_bins):
        try:
            a = _hermitian_solve(_load(psd_noise.matrices[f], loading), psd_speech.matrices[f], f)
        except SingularPsdError:
            if not fallback:
                raise
            singular.append(f)
            w[f, reference_index] = 1.0
            continue
        tr = np.trace(a)
        if abs(tr) < 1e-12:
            if not fallback:
                raise DegenerateSpeechPsdError(f)
            degenerate.append(f)
            continue
        w[f] = a[:, reference_index] / tr
    diag = {"singular_noise_bins": singular, "degenerate_speech_bins": degenerate}
    return BeamformerWeights(w, TIME_INVARIANT, reference_index, diag)


def delay_and_sum(steering: SteeringVector, reference_index: int = 0) -> BeamformerWeights:
    g = steering.values.T
    return BeamformerWeights(g / g.shape[1], TIME_INVARIANT, reference_index)


def apply_weights(weights: BeamformerWeights, spec: ComplexSpectrogram) -> ComplexSpectrogram:
    x = spec.data
    if weights.num_channels != spec.num_channels:
        raise ValueError(f"weights have {weights.num_channels} channels, spectrogram {spec.num_channels}")
    w = weights.values
    if weights.kind == TIME_INVARIANT:
        if w.shape[0] != spec.num_bins:
            raise ValueError(f"weights have {w.shape[0]} bins, spectrogram {spec.num_bins}")
        y = np.einsum("fc,ctf->tf", np.conj(w), x)
    else:
        if w.shape[:2] != (spec.num_frames, spec.num_bins):
            raise ValueError(
                f"time-variant weights cover {w.shape[:2]} frames/bins, spectrogram has "
                f"{(spec.num_frames, spec.num_bins)}")
        y = np.einsum("tfc,ctf->tf", w, x)
    return spec.with_data(y[None])


def residual_diagnostics(weights: BeamformerWeights, target: ComplexSpectrogram,
                         noise: ComplexSpectrogram, steering: SteeringVector | None = None) -> dict:
    """Frame-averaged residual distortion ``(u_r - W)^H Y`` and noise ``W^H N`` powers per bin.

    With ``steering`` given, ``|W^H G - 1|`` per bin is reported as well.
    """
    if weights.kind != TIME_INVARIANT:
        raise ValueError("residual diagnostics need time-invariant weights")
    r = weights.reference_index
    u = np.zeros(weights.num_channels)
    u[r] = 1.0
    diff = BeamformerWeights(u[None] - weights.values, TIME_INVARIANT, r)
    xi_d = apply_weights(diff, target).data[0]
    xi_n = apply_weights(weights, noise).data[0]
    out = {
        "distortion_power": np.mean(np.abs(xi_d) ** 2, axis=0),
        "noise_power": np.mean(np.abs(xi_n) ** 2, axis=0),
    }
    if steering is not None:
        gain = np.einsum("fc,cf->f", np.conj(weights.values), steering.values)
        out["distortionless_error"] = np.abs(gain - 1.0)
    return out
