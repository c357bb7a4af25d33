"""Steering vectors, inter-channel phase differences and the angle feature."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .room import ArrayGeometry
from .spectral import ComplexSpectrogram, StftConfig

__all__ = [
    "DEFAULT_PAIRS",
    "SteeringVector",
    "FeatureMatrix",
    "validate_pairs",
    "steering_vector",
    "ipd",
    "angle_feature",
]

# (1,15), (2,14), (3,13), (1,7), (12,4), (11,5), (12,8), (7,10), (8,9) in 0-based form
DEFAULT_PAIRS: tuple[tuple[int, int], ...] = (
    (0, 14), (1, 13), (2, 12), (0, 6), (11, 3), (10, 4), (11, 7), (6, 9), (7, 8))

_EPS = 1e-12


@dataclass(frozen=True)
class SteeringVector:
    values: np.ndarray  # [channels, bins]
    doa_deg: float
    geometry: ArrayGeometry

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # AF: [frames, bins]; IPD: [pairs, frames, bins]
    kind: str
    pairs: tuple[tuple[int, int], ...] = ()


def validate_pairs(pairs: Sequence[Sequence[int]], num_channels: int) -> tuple[tuple[int, int], ...]:
    out = []
    for pair in pairs:
        i, j = (int(v) for v in pair)
        if i == j:
            raise ValueError(f"pair ({i}, {j}) uses the same microphone twice")
        if not (0 <= i < num_channels and 0 <= j < num_channels):
            raise ValueError(f"pair ({i}, {j}) out of range for {num_channels} channels")
        out.append((i, j))
    if not out:
        raise ValueError("pair list is empty")
    return tuple(out)


def steering_vector(geometry: ArrayGeometry, doa_deg: float, cfg: StftConfig = StftConfig(),
                    sample_rate: int = 16000, speed_of_sound: float = 343.0) -> SteeringVector:
    """Far-field steering vector ``exp(-j 2 pi f d_i cos(doa) / c)`` per channel and bin."""
    if not 0.0 <= doa_deg <= 180.0:
        raise ValueError(f"doa_deg must lie in [0, 180], got {doa_deg}")
    d = geometry.axis_distances()
    freqs = cfg.bin_frequencies(sample_rate)
    # sin(90 - doa) is exactly 0 at broadside and exactly +-1 at endfire
    cos_doa = np.sin(np.deg2rad(90.0 - doa_deg))
    phase = -2.0 * np.pi * np.outer(d, freqs) * cos_doa / speed_of_sound
    values = np.exp(1j * phase)
    # exact 1 at the reference mic instead of exp(-0j) rounding noise
    values[geometry.reference_index] = 1.0
    return SteeringVector(values, float(doa_deg), geometry)


def _wrap(phase: np.ndarray) -> np.ndarray:
    # np.angle gives [-pi, pi]; fold -pi onto +pi for the half-open interval
    return np.where(phase <= -np.pi, phase + 2.0 * np.pi, phase)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a * conj(b) written out so identical inputs give an exactly real product
    re = a.real * b.real + a.imag * b.imag
    im = a.imag * b.real - a.real * b.imag
    return re + 1j * im


def ipd(spec: ComplexSpectrogram, pairs: Sequence[Sequence[int]] = DEFAULT_PAIRS) -> FeatureMatrix:
    """Phase of ``X_i / X_j`` per pair, taken as the phase of ``X_i conj(X_j)`` so
    that vanishing bins give 0 rather than NaN."""
    pairs = validate_pairs(pairs, spec.num_channels)
    x = spec.data
    out = np.stack([_wrap(np.angle(_cross(x[i], x[j]))) for i, j in pairs])
    return FeatureMatrix(out, "ipd", pairs)


def angle_feature(spec: ComplexSpectrogram, steering: SteeringVector,
                  pairs: Sequence[Sequence[int]] = DEFAULT_PAIRS) -> FeatureMatrix:
    """Pair-averaged cosine similarity between observed and expected channel ratios.

    Both ratios are treated as 2-D real vectors (real, imaginary).  The
    expected ratio for pair ``(i, j)`` is ``G_i / G_j``, the value ``X_i / X_j``
    takes for a single plane wave from the steered direction.
    """
    pairs = validate_pairs(pairs, spec.num_channels)
    if steering.num_channels != spec.num_channels or steering.values.shape[1] != spec.num_bins:
        raise ValueError(
            f"steering vector {steering.values.shape} does not match spectrogram "
            f"({spec.num_channels} ch, {spec.num_bins} bins)")
    x = spec.data
    g = steering.values
    total = np.zeros(x.shape[1:])
    for i, j in pairs:
        expected = g[i] / g[j]
        # X_i / X_j points the same way as X_i conj(X_j)
        observed = _cross(x[i], x[j])
        num = np.real(np.conj(expected)[None, :] * observed)
        den = np.abs(expected)[None, :] * np.abs(observed)
        total += np.divide(num, den, out=np.zeros_like(num), where=den > _EPS)
    return FeatureMatrix(total / len(pairs), "af", pairs)
