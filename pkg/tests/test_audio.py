"""
Tests for waveforms, WAV files, chunking, resampling and companding.
"""

from pathlib import Path

import numpy as np
import pytest

from spectrans.core.errors import (
    ConfigError,
    DegenerateInputError,
    FormatError,
)
from spectrans.dsp.audio import (
    Waveform,
    chunk,
    chunk_count,
    decimate,
    mix,
    mu_law_decode,
    mu_law_encode,
    mu_law_requantize,
    normalize_peak,
    read_wav,
    resample_cubic,
    resample_linear,
    write_wav,
)

SR = 16000


def _sine(freq: float, seconds: float, sr: int = SR) -> Waveform:
    t = np.arange(int(seconds * sr)) / sr
    return Waveform(0.5 * np.sin(2 * np.pi * freq * t), sr)


#####
##### Waveforms
#####


@pytest.mark.parametrize(
    "samples,rate",
    [
        (np.zeros((2, 3)), SR),
        (np.array([0.0, np.nan]), SR),
        (np.array([0.0, np.inf]), SR),
        (np.zeros(4), 0),
    ],
)
def test_invalid_waveform(samples: np.ndarray, rate: int):
    with pytest.raises(ConfigError):
        Waveform(samples, rate)


def test_waveform_is_read_only():
    w = Waveform(np.zeros(8), SR)
    with pytest.raises(ValueError):
        w.samples[0] = 1.0


def test_fitted():
    w = Waveform(np.arange(5, dtype=float), SR)
    assert list(w.fitted(3).samples) == [0, 1, 2]
    assert list(w.fitted(7).samples) == [0, 1, 2, 3, 4, 0, 0]


#####
##### WAV files
#####


def test_wav_roundtrip(tmp_path: Path):
    w = _sine(440, 0.25)
    path = tmp_path / "sine.wav"
    write_wav(w, path)
    back = read_wav(path)
    assert back.sample_rate_hz == SR
    assert len(back) == len(w)
    assert np.max(np.abs(back.samples - w.samples)) <= 0.5 / 32768 + 1e-12


def test_wav_clipping(tmp_path: Path):
    path = tmp_path / "loud.wav"
    write_wav(Waveform(np.array([1.5, -1.5, 0.0]), SR), path)
    back = read_wav(path)
    assert back.samples[0] == pytest.approx(32767 / 32768)
    assert back.samples[1] == -1.0
    assert back.samples[2] == 0.0


def test_malformed_wav(tmp_path: Path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"this is not a riff file at all")
    with pytest.raises(FormatError):
        read_wav(path)


#####
##### Level and segmentation
#####


def test_normalize_peak():
    w = Waveform(np.array([0.1, -0.4, 0.2]), SR)
    out = normalize_peak(w, 0.8)
    assert np.max(np.abs(out.samples)) == pytest.approx(0.8)
    assert out.samples[0] == pytest.approx(0.2)


def test_normalize_silence():
    with pytest.raises(DegenerateInputError):
        normalize_peak(Waveform(np.zeros(16), SR))


@pytest.mark.parametrize("peak", [0.0, -0.5, 1.5])
def test_normalize_invalid_peak(peak: float):
    with pytest.raises(ConfigError):
        normalize_peak(Waveform(np.ones(4), SR), peak)


@pytest.mark.parametrize(
    "duration_ms,chunk_ms,hop_ms,expected",
    [
        (3100, 1550, 1550, 2),
        (1000, 1550, 1550, 1),
        (4000, 1550, 775, 5),
    ],
)
def test_chunking(
    duration_ms: int, chunk_ms: float, hop_ms: float, expected: int
):
    n = duration_ms * SR // 1000
    w = Waveform(np.linspace(-0.5, 0.5, n), SR)
    chunks = chunk(w, chunk_ms, hop_ms)
    assert len(chunks) == expected
    chunk_len = int(chunk_ms * SR / 1000)
    hop_len = int(hop_ms * SR / 1000)
    assert chunk_count(n, chunk_len, hop_len) == expected
    assert all(len(c) == chunk_len for c in chunks)
    head = min(n, chunk_len)
    assert np.array_equal(chunks[0].samples[:head], w.samples[:head])


def test_last_chunk_is_zero_padded():
    w = Waveform(np.ones(1000), SR)
    [c] = chunk(w, 100, 100)
    assert len(c) == 1600
    assert np.all(c.samples[:1000] == 1.0)
    assert np.all(c.samples[1000:] == 0.0)


def test_invalid_chunking():
    w = Waveform(np.ones(100), SR)
    with pytest.raises(ConfigError):
        chunk(w, 100, 200)
    with pytest.raises(DegenerateInputError):
        chunk(Waveform(np.zeros(0), SR), 100, 100)


#####
##### Resampling
#####


@pytest.mark.parametrize("resample", [resample_linear, resample_cubic])
def test_resample_constant(resample):
    w = Waveform(np.full(400, 0.3), 4000)
    out = resample(w, SR)
    assert out.sample_rate_hz == SR
    assert len(out) == 1600
    assert np.allclose(out.samples, 0.3, atol=1e-9)


@pytest.mark.parametrize("resample", [resample_linear, resample_cubic])
def test_resample_ramp(resample):
    w = Waveform(np.linspace(0.0, 1.0, 401), 4000)
    out = resample(w, SR)
    pos = np.arange(len(out)) / 4
    interior = (pos > 20) & (pos < 380)
    assert np.allclose(out.samples[interior], pos[interior] / 400, atol=1e-6)


def test_decimate_then_interpolate_keeps_pitch():
    w = _sine(440, 1.0)
    low = decimate(w, 4000)
    assert low.sample_rate_hz == 4000
    assert len(low) == 4000
    back = resample_cubic(low, SR)
    assert len(back) == SR
    spectrum = np.abs(np.fft.rfft(back.samples))
    assert int(np.argmax(spectrum)) == 440


def test_mix():
    a = Waveform(np.ones(4), SR)
    b = Waveform(np.full(4, 2.0), SR)
    assert np.allclose(mix([a, b], [0.5, 0.25]).samples, 1.0)


#####
##### Mu-law companding
#####


def test_mu_law_anchors():
    assert int(mu_law_encode(0.0)) == 128
    assert int(mu_law_encode(1.0)) == 255
    assert int(mu_law_encode(-1.0)) == 0
    assert int(mu_law_encode(3.0)) == 255
    assert float(mu_law_decode(255)) == pytest.approx(1.0)
    assert float(mu_law_decode(0)) == pytest.approx(-1.0)


def test_mu_law_sweep():
    x = np.linspace(-1.0, 1.0, 20001)
    codes = mu_law_encode(x)
    assert np.all(np.diff(codes) >= 0)
    assert codes.min() == 0 and codes.max() == 255
    # Each amplitude decodes to within one quantisation step.
    lo = mu_law_decode(np.maximum(codes - 1, 0))
    hi = mu_law_decode(np.minimum(codes + 1, 255))
    assert np.all(lo <= x + 1e-12) and np.all(x <= hi + 1e-12)
    # Widest step at the top of the range: codes 254 and 255 decode to
    # 0.9573 and 1.0, and rounding in the companded domain puts the
    # boundary at (256 ** (254.5 / 127.5 - 1) - 1) / 255 = 0.9784, so the
    # largest error is 1 - 0.9784 = 0.0216.
    assert np.max(np.abs(mu_law_requantize(x) - x)) < 0.022


@pytest.mark.parametrize("channels", [2, 16, 256])
def test_mu_law_codes_are_fixed_points(channels: int):
    codes = np.arange(channels)
    back = mu_law_encode(mu_law_decode(codes, channels), channels)
    assert np.array_equal(back, codes)
