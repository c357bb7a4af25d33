import struct

import numpy as np
import pytest

from mcsep.spectral import MultiChannelWaveform
from mcsep.wavio import (MalformedHeaderError, TruncatedFileError, UnsupportedCodecError,
                         read_wav, write_wav)


def test_float32_round_trip_bit_identical(tmp_path, rng):
    x = rng.uniform(-1, 1, (2, 1000)).astype(np.float32).astype(np.float64)
    write_wav(tmp_path / "a.wav", MultiChannelWaveform(x, 16000), "float32")
    y = read_wav(tmp_path / "a.wav")
    assert y.sample_rate == 16000
    np.testing.assert_array_equal(y.samples, x)


def test_pcm16_clipping(tmp_path):
    x = np.array([1.0, -1.0, 0.5, 2.0, -3.0])
    write_wav(tmp_path / "p.wav", MultiChannelWaveform(x, 8000), "pcm16")
    y = read_wav(tmp_path / "p.wav").samples[0]
    np.testing.assert_array_equal(y, [32767 / 32768, -1.0, 0.5, 32767 / 32768, -1.0])


def test_fifteen_channel_order(tmp_path):
    ramps = np.stack([np.linspace(0, 1, 200) * (c + 1) / 16 for c in range(15)])
    write_wav(tmp_path / "m.wav", MultiChannelWaveform(ramps, 16000), "pcm16")
    y = read_wav(tmp_path / "m.wav").samples
    assert y.shape == (15, 200)
    np.testing.assert_allclose(y, ramps, atol=1 / 32768)
    assert np.all(np.diff(y[:, -1]) > 0)


def _header(tag, channels, bits, data_len, rate=16000):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", data_len)
    return b"RIFF" + struct.pack("<I", 4 + len(body) + data_len) + body


def test_distinct_errors(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(_header(1, 1, 8, 4) + b"\x00" * 4)
    with pytest.raises(UnsupportedCodecError):
        read_wav(p)
    p.write_bytes(_header(1, 1, 16, 100) + b"\x00" * 10)
    with pytest.raises(TruncatedFileError):
        read_wav(p)
    p.write_bytes(b"RIFX" + b"\x00" * 40)
    with pytest.raises(MalformedHeaderError):
        read_wav(p)
    p.write_bytes(b"RIF")
    with pytest.raises(TruncatedFileError):
        read_wav(p)
    assert not issubclass(UnsupportedCodecError, TruncatedFileError)
    assert not issubclass(TruncatedFileError, MalformedHeaderError)


def test_extensible_float_is_read(tmp_path):
    x = np.array([0.25, -0.5], dtype="<f4")
    fmt = struct.pack("<HHIIHH", 0xFFFE, 1, 16000, 64000, 4, 32)
    fmt += struct.pack("<HHI", 22, 32, 0) + struct.pack("<H", 3) + b"\x00" * 14
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", 8) + x.tobytes()
    (tmp_path / "e.wav").write_bytes(b"RIFF" + struct.pack("<I", 4 + len(body)) + body)
    np.testing.assert_array_equal(read_wav(tmp_path / "e.wav").samples[0], [0.25, -0.5])


def test_unknown_encoding_rejected(tmp_path):
    with pytest.raises(UnsupportedCodecError):
        write_wav(tmp_path / "x.wav", MultiChannelWaveform(np.zeros(4), 16000), "mp3")
