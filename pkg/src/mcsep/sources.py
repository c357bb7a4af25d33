"""Synthetic speech-like source signals for simulation when no corpus is supplied.

Each utterance is a sequence of syllables: a harmonic glottal excitation with
a drifting pitch contour, shaped by random vowel formants and a raised-cosine
envelope, with occasional fricative noise onsets and pauses in between.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

from .spectral import MultiChannelWaveform
from .wavio import read_wav

__all__ = ["speech_like", "load_source_pool"]

_VOWELS = (  # F1, F2, F3 in Hz
    (730, 1090, 2440), (270, 2290, 3010), (300, 870, 2240), (530, 1840, 2480),
    (660, 1720, 2410), (490, 1350, 1690), (570, 840, 2410), (440, 1020, 2240),
)


def _resonator(freq: float, bandwidth: float, fs: int):
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2.0 * np.pi * freq / fs
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return [1.0 - r], a


def _syllable(rng, n: int, fs: int, f0: float) -> np.ndarray:
    t = np.arange(n) / fs
    contour = f0 * (1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(2, 5) * t + rng.uniform(0, 2 * np.pi))
                    + rng.uniform(-0.15, 0.15) * t / max(t[-1], 1e-3))
    phase = 2 * np.pi * np.cumsum(contour) / fs
    harmonics = np.arange(1, int(4000 / f0) + 1)
    excitation = np.sin(np.outer(phase, harmonics)) @ (1.0 / harmonics)
    vowel = _VOWELS[rng.integers(len(_VOWELS))]
    out = np.zeros(n)
    for k, formant in enumerate(vowel):
        b, a = _resonator(formant * rng.uniform(0.9, 1.1), 60.0 + 40.0 * k, fs)
        out += lfilter(b, a, excitation) / (k + 1)
    env = np.sin(np.pi * np.arange(n) / n) ** 0.7
    return out * env


def speech_like(rng: np.random.Generator, seconds: float, sample_rate: int = 16000,
                f0: float | None = None, rms: float = 0.05) -> MultiChannelWaveform:
    fs = sample_rate
    total = int(round(seconds * fs))
    f0 = float(rng.uniform(90.0, 240.0)) if f0 is None else f0
    hiss = butter(4, [2500, 6500], "bandpass", fs=fs, output="sos")
    out = np.zeros(total)
    pos = int(rng.uniform(0.02, 0.1) * fs)
    while pos < total:
        n = int(rng.uniform(0.12, 0.35) * fs)
        if rng.random() < 0.3:
            m = int(rng.uniform(0.04, 0.09) * fs)
            burst = sosfilt(hiss, rng.standard_normal(m)) * np.hanning(m) * 0.3
            stop = min(total, pos + m)
            out[pos:stop] += burst[:stop - pos]
            pos += m
        stop = min(total, pos + n)
        if stop - pos > 16:
            out[pos:stop] += _syllable(rng, n, fs, f0 * rng.uniform(0.9, 1.1))[:stop - pos]
        pos += n + int(rng.uniform(0.03, 0.12 if rng.random() < 0.8 else 0.35) * fs)
    level = np.sqrt(np.mean(out ** 2))
    if level > 0:
        out *= rms / level
    return MultiChannelWaveform(out, fs)


def load_source_pool(directory: str | os.PathLike, sample_rate: int) -> list[Path]:
    """Sorted list of WAV files under ``directory``; all must be at ``sample_rate``."""
    paths = sorted(Path(directory).rglob("*.wav"))
    if len(paths) < 2:
        raise ValueError(f"need at least two source WAV files in {directory}")
    for p in paths:
        rate = read_wav(p).sample_rate
        if rate != sample_rate:
            raise ValueError(f"{p} is {rate} Hz; resampling is not supported (expected {sample_rate})")
    return paths
