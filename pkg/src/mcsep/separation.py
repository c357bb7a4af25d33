"""End-to-end single-utterance separation: STFT, masks, channel integration, iSTFT."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .beamforming import (
    DEFAULT_LOADING,
    TIME_VARIANT,
    BeamformerWeights,
    apply_weights,
    delay_and_sum,
    estimate_psd,
    mvdr_from_psd,
)
from .features import DEFAULT_PAIRS, angle_feature, steering_vector
from .masking import DEFAULT_CRM_BOUND, ComplexMask, af_heuristic_masks, apply_mask, oracle_crm
from .room import ArrayGeometry
from .spectral import ComplexSpectrogram, MultiChannelWaveform, StftConfig, istft, stft
from .tensorfile import read_tensor

__all__ = ["METHODS", "MASK_SOURCES", "SeparationSettings", "MissingInputError", "separate",
           "estimate_masks"]

METHODS = ("tf_mask", "filter_sum", "mvdr", "delay_sum")
MASK_SOURCES = ("oracle", "af_heuristic", "file")


class MissingInputError(ValueError):
    pass


@dataclass(frozen=True)
class SeparationSettings:
    stft: StftConfig = field(default_factory=StftConfig)
    crm_bound: float | None = DEFAULT_CRM_BOUND
    af_threshold: float = 0.5
    loading: float = DEFAULT_LOADING
    reference_index: int = 0
    pairs: tuple[tuple[int, int], ...] = DEFAULT_PAIRS
    speed_of_sound: float = 343.0


def _load_mask(path, shape) -> ComplexMask:
    if path is None:
        raise MissingInputError("mask_source='file' needs a mask file")
    if not os.path.exists(path):
        raise MissingInputError(f"mask file {path} does not exist")
    m = read_tensor(path)
    if m.shape != shape:
        raise ValueError(f"mask {path} has shape {m.shape}, expected {shape}")
    return ComplexMask(m.astype(np.complex128))


def _steering(geometry, doa_deg, spec: ComplexSpectrogram, settings: SeparationSettings):
    if doa_deg is None:
        raise MissingInputError("target DOA is required for this method / mask source")
    return steering_vector(geometry, doa_deg, spec.config, spec.sample_rate, settings.speed_of_sound)


def estimate_masks(spec: ComplexSpectrogram, mask_source: str, *, need_noise: bool,
                   geometry: ArrayGeometry, settings: SeparationSettings, doa_deg=None,
                   target: MultiChannelWaveform | None = None,
                   interferer: MultiChannelWaveform | None = None,
                   mask_files: dict | None = None) -> tuple[ComplexMask, ComplexMask | None]:
    """Target mask (and noise mask when ``need_noise``) on the reference channel."""
    ref = settings.reference_index
    x_ref = spec.channel(ref)
    if mask_source == "oracle":
        if target is None:
            raise MissingInputError("mask_source='oracle' needs the reverberant target stem")
        s_ref = stft(target.channel(ref), spec.config)
        m_t = oracle_crm(s_ref, x_ref, settings.crm_bound)
        m_n = None
        if need_noise:
            if interferer is not None:
                n_ref = stft(interferer.channel(ref), spec.config)
            else:
                n_ref = x_ref.with_data(x_ref.data - s_ref.data)
            m_n = oracle_crm(n_ref, x_ref, settings.crm_bound)
        return m_t, m_n
    if mask_source == "af_heuristic":
        af = angle_feature(spec, _steering(geometry, doa_deg, spec, settings), settings.pairs)
        m_t, m_n = af_heuristic_masks(af, settings.af_threshold)
        return m_t, (m_n if need_noise else None)
    if mask_source == "file":
        mask_files = mask_files or {}
        shape = (spec.num_frames, spec.num_bins)
        m_t = _load_mask(mask_files.get("target"), shape)
        m_n = _load_mask(mask_files.get("noise"), shape) if need_noise else None
        return m_t, m_n
    raise ValueError(f"unknown mask source {mask_source!r}; expected one of {MASK_SOURCES}")


def separate(mixture: MultiChannelWaveform, method: str, mask_source: str = "oracle", *,
             geometry: ArrayGeometry | None = None, doa_deg: float | None = None,
             target: MultiChannelWaveform | None = None,
             interferer: MultiChannelWaveform | None = None,
             mask_files: dict | None = None, filter_file: str | os.PathLike | None = None,
             settings: SeparationSettings = SeparationSettings()) -> MultiChannelWaveform:
    """Separate the target speaker from an R-channel mixture.

    ``tf_mask`` masks the reference channel; ``mvdr`` estimates one fixed
    beamformer for the whole utterance from target/noise masks;
    ``filter_sum`` applies per-frame filters from ``filter_file`` or, without
    one, the MVDR (if masks are obtainable) or delay-and-sum solution repeated
    over frames; ``delay_sum`` needs only the target DOA.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    geometry = ArrayGeometry.from_gaps() if geometry is None else geometry
    if geometry.num_mics != mixture.num_channels:
        raise ValueError(f"mixture has {mixture.num_channels} channels, geometry {geometry.num_mics}")
    spec = stft(mixture, settings.stft)
    ref = settings.reference_index
    masks = dict(geometry=geometry, settings=settings, doa_deg=doa_deg, target=target,
                 interferer=interferer, mask_files=mask_files)

    if method == "tf_mask":
        m_t, _ = estimate_masks(spec, mask_source, need_noise=False, **masks)
        out = apply_mask(m_t, spec.channel(ref))
    elif method == "mvdr":
        out = apply_weights(_mvdr(spec, mask_source, masks, settings), spec)
    elif method == "delay_sum":
        out = apply_weights(delay_and_sum(_steering(geometry, doa_deg, spec, settings), ref), spec)
    else:
        if filter_file is not None:
            if not os.path.exists(filter_file):
                raise MissingInputError(f"filter file {filter_file} does not exist")
            w = BeamformerWeights(read_tensor(filter_file), TIME_VARIANT, ref)
        else:
            try:
                fixed = _mvdr(spec, mask_source, masks, settings)
            except MissingInputError:
                fixed = delay_and_sum(_steering(geometry, doa_deg, spec, settings), ref)
            w = fixed.broadcast(spec.num_frames)
        out = apply_weights(w, spec)
    return istft(out, length=mixture.num_samples)


def _mvdr(spec, mask_source, masks, settings) -> BeamformerWeights:
    m_t, m_n = estimate_masks(spec, mask_source, need_noise=True, **masks)
    phi_y = estimate_psd(spec, m_t)
    phi_n = estimate_psd(spec, m_n)
    return mvdr_from_psd(phi_y, phi_n, settings.reference_index, settings.loading, fallback=True)
