"""Complex time-frequency masks: oracle ratio masks, an angle-feature heuristic,
and mask application on the reference channel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureMatrix
from .spectral import ComplexSpectrogram

__all__ = ["ComplexMask", "oracle_crm", "apply_mask", "af_heuristic_masks", "DEFAULT_CRM_BOUND"]

DEFAULT_CRM_BOUND = 10.0
_MIN_MIXTURE_MAG = 1e-10


@dataclass(frozen=True)
class ComplexMask:
    values: np.ndarray  # [frames, bins]
    compression_bound: float | None = None

    def __post_init__(self):
        m = np.asarray(self.values, dtype=np.complex128)
        if m.ndim != 2:
            raise ValueError(f"mask must be [frames, bins], got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("mask contains non-finite values")
        k = self.compression_bound
        if k is not None and (np.any(np.abs(m.real) > k) or np.any(np.abs(m.imag) > k)):
            raise ValueError(f"mask exceeds its compression bound {k}")
        object.__setattr__(self, "values", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _single_channel(spec: ComplexSpectrogram | np.ndarray, name: str) -> np.ndarray:
    z = spec.data if isinstance(spec, ComplexSpectrogram) else np.asarray(spec)
    if z.ndim == 3:
        if z.shape[0] != 1:
            raise ValueError(f"{name} must be single-channel, got {z.shape[0]} channels")
        z = z[0]
    return z


def oracle_crm(stem_ref: ComplexSpectrogram, mixture_ref: ComplexSpectrogram,
               bound: float | None = DEFAULT_CRM_BOUND) -> ComplexMask:
    """``S / X`` per bin with real and imaginary parts hard-clipped to ``[-bound, bound]``.

    Bins where ``|X| < 1e-10`` get a zero mask.  ``bound=None`` disables clipping.
    """
    s = _single_channel(stem_ref, "stem_ref")
    x = _single_channel(mixture_ref, "mixture_ref")
    if s.shape != x.shape:
        raise ValueError(f"shape mismatch: stem {s.shape} vs mixture {x.shape}")
    power = x.real ** 2 + x.imag ** 2
    live = power >= _MIN_MIXTURE_MAG ** 2
    # S conj(X) / |X|^2, written out so S = X gives exactly 1
    re = s.real * x.real + s.imag * x.imag
    im = s.imag * x.real - s.real * x.imag
    m = np.zeros_like(x, dtype=np.complex128)
    m[live] = re[live] / power[live] + 1j * (im[live] / power[live])
    if bound is not None and np.isfinite(bound):
        m = np.clip(m.real, -bound, bound) + 1j * np.clip(m.imag, -bound, bound)
    else:
        bound = None
    return ComplexMask(m, bound)


def apply_mask(mask: ComplexMask, spec_ref: ComplexSpectrogram) -> ComplexSpectrogram:
    """Masked reference spectrum via the explicit real/imaginary product."""
    x = _single_channel(spec_ref, "spec_ref")
    m = mask.values
    if m.shape != x.shape:
        raise ValueError(f"shape mismatch: mask {m.shape} vs spectrogram {x.shape}")
    real = m.real * x.real - m.imag * x.imag
    imag = m.imag * x.real + m.real * x.imag
    return spec_ref.with_data((real + 1j * imag)[None])


def af_heuristic_masks(af: FeatureMatrix, threshold: float = 0.5) -> tuple[ComplexMask, ComplexMask]:
    """Binary target/noise masks from thresholding the angle feature."""
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [-1, 1], got {threshold}")
    if af.values.ndim != 2:
        raise ValueError("expected a [frames, bins] angle feature")
    target = (af.values >= threshold).astype(np.float64)
    return ComplexMask(target.astype(np.complex128), 1.0), ComplexMask((1.0 - target).astype(np.complex128), 1.0)
