"""Waveform containers and the STFT/iSTFT pair used by every other module.

Shapes follow ``[channels, frames, bins]`` for spectrograms and
``[channels, samples]`` for waveforms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import check_COLA, check_NOLA, get_window

__all__ = [
    "MultiChannelWaveform",
    "StftConfig",
    "ComplexSpectrogram",
    "stft",
    "istft",
    "SignalTooShortError",
]

WINDOW_KINDS = ("hann", "hamming", "boxcar")
_SYNTHESIS_FLOOR = 1e-12


class SignalTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class MultiChannelWaveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ValueError(f"samples must be [channels, time], got shape {x.shape}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def channel(self, index: int) -> "MultiChannelWaveform":
        return MultiChannelWaveform(self.samples[index:index + 1], self.sample_rate)


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters. Defaults give 257 bins, 32 ms window, 16 ms hop at 16 kHz."""

    fft_size: int = 512
    window_length: int = 512
    hop_length: int = 256
    window: str = "hann"
    center_padding: bool = True

    def __post_init__(self):
        if self.window not in WINDOW_KINDS:
            raise ValueError(f"unknown window {self.window!r}; expected one of {WINDOW_KINDS}")
        if self.fft_size % 2:
            raise ValueError("fft_size must be even")
        if not 0 < self.hop_length <= self.window_length <= self.fft_size:
            raise ValueError(
                "need 0 < hop_length <= window_length <= fft_size, got "
                f"{self.hop_length}, {self.window_length}, {self.fft_size}")
        win = self.window_array()
        overlap = self.window_length - self.hop_length
        if not check_COLA(win, self.window_length, overlap):
            raise ValueError(
                f"{self.window} window of length {self.window_length} with hop "
                f"{self.hop_length} violates constant overlap-add")
        if not check_NOLA(win ** 2, self.window_length, overlap):
            raise ValueError("squared window fails the nonzero overlap-add condition")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def window_array(self) -> np.ndarray:
        # periodic (fftbins=True) variants
        return get_window(self.window, self.window_length, fftbins=True).astype(np.float64)

    def num_frames(self, num_samples: int) -> int:
        padded = num_samples + (2 * (self.window_length // 2) if self.center_padding else 0)
        return 1 + (padded - self.window_length) // self.hop_length

    def bin_frequencies(self, sample_rate: int) -> np.ndarray:
        return np.arange(self.num_bins) * sample_rate / self.fft_size

    def to_dict(self) -> dict:
        return {
            "fft_size": self.fft_size,
            "window_length": self.window_length,
            "hop_length": self.hop_length,
            "window": self.window,
            "center_padding": self.center_padding,
        }


@dataclass(frozen=True)
class ComplexSpectrogram:
    data: np.ndarray
    config: StftConfig
    sample_rate: int
    num_samples: int | None = field(default=None)

    def __post_init__(self):
        z = np.asarray(self.data, dtype=np.complex128)
        if z.ndim == 2:
            z = z[None]
        if z.ndim != 3:
            raise ValueError(f"data must be [channels, frames, bins], got shape {z.shape}")
        if z.shape[2] != self.config.num_bins:
            raise ValueError(
                f"expected {self.config.num_bins} bins for fft_size {self.config.fft_size}, "
                f"got {z.shape[2]}")
        object.__setattr__(self, "data", z)

    @property
    def num_channels(self) -> int:
        return self.data.shape[0]

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def num_bins(self) -> int:
        return self.data.shape[2]

    def channel(self, index: int) -> "ComplexSpectrogram":
        return self.with_data(self.data[index:index + 1])

    def with_data(self, data: np.ndarray) -> "ComplexSpectrogram":
        return ComplexSpectrogram(data, self.config, self.sample_rate, self.num_samples)


def stft(wave: MultiChannelWaveform, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    """One-sided STFT of every channel."""
    x = wave.samples
    if x.shape[1] < cfg.window_length:
        raise SignalTooShortError(
            f"input too short: {x.shape[1]} samples < window length {cfg.window_length}")
    if cfg.center_padding:
        pad = cfg.window_length // 2
        x = np.pad(x, ((0, 0), (pad, pad)), mode="reflect")
    frames = sliding_window_view(x, cfg.window_length, axis=1)[:, ::cfg.hop_length]
    spec = np.fft.rfft(frames * cfg.window_array(), n=cfg.fft_size, axis=-1)
    return ComplexSpectrogram(spec, cfg, wave.sample_rate, wave.num_samples)


def istft(spec: ComplexSpectrogram, cfg: StftConfig | None = None,
          length: int | None = None) -> MultiChannelWaveform:
    """Weighted overlap-add inverse of :func:`stft`.

    The synthesis window equals the analysis window; the output is divided
    by the overlap-added squared window (floored at 1e-12). ``length``
    defaults to the source length recorded on ``spec``.
    """
    cfg = spec.config if cfg is None else cfg
    if spec.num_bins != cfg.num_bins:
        raise ValueError(f"spectrogram has {spec.num_bins} bins, config expects {cfg.num_bins}")
    if length is None:
        length = spec.num_samples
    win = cfg.window_array()
    n_ch, n_frames, _ = spec.data.shape
    frames = np.fft.irfft(spec.data, n=cfg.fft_size, axis=-1)[..., :cfg.window_length] * win
    padded_len = (n_frames - 1) * cfg.hop_length + cfg.window_length
    out = np.zeros((n_ch, padded_len))
    norm = np.zeros(padded_len)
    win_sq = win ** 2
    for t in range(n_frames):
        start = t * cfg.hop_length
        out[:, start:start + cfg.window_length] += frames[:, t]
        norm[start:start + cfg.window_length] += win_sq
    out /= np.maximum(norm, _SYNTHESIS_FLOOR)
    if cfg.center_padding:
        out = out[:, cfg.window_length // 2:]
    if length is None:
        length = out.shape[1] - (cfg.window_length // 2 if cfg.center_padding else 0)
    if out.shape[1] >= length:
        out = out[:, :length]
    else:
        out = np.pad(out, ((0, 0), (0, length - out.shape[1])))
    return MultiChannelWaveform(out, spec.sample_rate)
