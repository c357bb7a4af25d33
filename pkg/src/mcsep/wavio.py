"""Minimal RIFF/WAVE reader and writer for PCM16 and IEEE float32.

The stdlib ``wave`` module cannot read float files, so the chunk walking is
done here with ``struct``.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from .spectral import MultiChannelWaveform

__all__ = [
    "read_wav",
    "write_wav",
    "WavError",
    "UnsupportedCodecError",
    "TruncatedFileError",
    "MalformedHeaderError",
]

_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE
ENCODINGS = ("pcm16", "float32")


class WavError(ValueError):
    pass


class UnsupportedCodecError(WavError):
    pass


class TruncatedFileError(WavError):
    pass


class MalformedHeaderError(WavError):
    pass


def _parse_fmt(body: bytes) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise MalformedHeaderError(f"fmt chunk too small ({len(body)} bytes)")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == _EXTENSIBLE:
        if len(body) < 40:
            raise MalformedHeaderError("WAVE_FORMAT_EXTENSIBLE fmt chunk too small")
        # first two bytes of the sub-format GUID carry the real format tag
        tag = struct.unpack("<H", body[24:26])[0]
    if channels == 0 or rate == 0:
        raise MalformedHeaderError("zero channels or zero sample rate")
    if block_align != channels * (bits // 8):
        raise MalformedHeaderError(
            f"block_align {block_align} inconsistent with {channels} ch x {bits} bits")
    return tag, channels, rate, bits


def read_wav(path: str | os.PathLike) -> MultiChannelWaveform:
    """Read a PCM16 or float32 file; PCM16 is scaled by 1/32768."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12:
        raise TruncatedFileError(f"{path}: {len(raw)} bytes, no RIFF header")
    riff, _, wave = struct.unpack("<4sI4s", raw[:12])
    if riff != b"RIFF" or wave != b"WAVE":
        raise MalformedHeaderError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid, size = struct.unpack("<4sI", raw[pos:pos + 8])
        body = raw[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise TruncatedFileError(
                f"{path}: chunk {cid!r} declares {size} bytes, only {len(body)} present")
        if cid == b"fmt ":
            fmt = _parse_fmt(body)
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise MalformedHeaderError(f"{path}: missing fmt chunk")
    if data is None:
        raise TruncatedFileError(f"{path}: missing data chunk")

    tag, channels, rate, bits = fmt
    if tag == _PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif tag == _IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedCodecError(f"{path}: format tag {tag} with {bits} bits is not supported")
    if samples.size % channels:
        raise TruncatedFileError(f"{path}: partial sample frame at end of data")
    return MultiChannelWaveform(samples.reshape(-1, channels).T, rate)


def write_wav(path: str | os.PathLike, wave: MultiChannelWaveform,
              encoding: str = "float32") -> None:
    """Write interleaved little-endian samples.

    ``pcm16`` rounds ``x * 32768`` and clips to [-32768, 32767].
    """
    if encoding == "pcm16":
        q = np.clip(np.round(wave.samples * 32768.0), -32768, 32767)
        payload = q.T.astype("<i2").tobytes()
        tag, bits = _PCM, 16
    elif encoding == "float32":
        payload = wave.samples.T.astype("<f4").tobytes()
        tag, bits = _IEEE_FLOAT, 32
    else:
        raise UnsupportedCodecError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")
    channels = wave.num_channels
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, wave.sample_rate,
                      wave.sample_rate * block_align, block_align, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)
