import numpy as np
import pytest

from spectrans.core.errors import ConfigError, ContractError
from spectrans.dsp.mel import (
    MelFilterbank,
    from_mel,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
    to_mel,
)
from spectrans.dsp.stft import Spectrogram, StftParams

SR = 16000
PARAMS = StftParams()


def _linear(frames: int, seed: int = 0) -> Spectrogram:
    rng = np.random.default_rng(seed)
    mags = np.abs(rng.standard_normal((frames, PARAMS.linear_bins)))
    return Spectrogram(mags, PARAMS, SR)


def test_mel_scale():
    assert float(hz_to_mel(0.0)) == 0.0
    assert float(hz_to_mel(700.0)) == pytest.approx(781.17, abs=0.01)
    f = np.array([50.0, 440.0, 4000.0, 8000.0])
    assert np.allclose(mel_to_hz(hz_to_mel(f)), f)


@pytest.mark.parametrize("mel_bins", [40, 64, 80])
def test_filters_are_triangles(mel_bins: int):
    fb = mel_filterbank(mel_bins, 1024, SR)
    assert fb.weights.shape == (mel_bins, 513)
    assert np.all(fb.weights >= 0)
    assert np.all(np.diff(fb.centers_hz) > 0)
    for row in fb.weights:
        support = np.flatnonzero(row)
        assert len(support) > 0
        seg = row[support[0] : support[-1] + 1]
        assert np.all(seg > 0)
        peak = int(np.argmax(seg))
        assert np.all(np.diff(seg[: peak + 1]) >= 0)
        assert np.all(np.diff(seg[peak:]) <= 0)


@pytest.mark.parametrize(
    "mel_bins,fmin,fmax",
    [(0, 0.0, None), (64, 0.0, 9000.0), (64, 4000.0, 2000.0)],
)
def test_invalid_filterbank(mel_bins: int, fmin: float, fmax: float | None):
    with pytest.raises(ConfigError):
        mel_filterbank(mel_bins, 1024, SR, fmin, fmax)


def test_to_mel_is_linear():
    fb = mel_filterbank(64, 1024, SR)
    a, b = _linear(3, seed=1), _linear(3, seed=2)
    sum_ = a.with_magnitudes(a.magnitudes + 2 * b.magnitudes)
    expected = to_mel(a, fb).magnitudes + 2 * to_mel(b, fb).magnitudes
    assert np.allclose(to_mel(sum_, fb).magnitudes, expected)


def test_from_mel_is_non_negative():
    fb = mel_filterbank(64, 1024, SR)
    mel = to_mel(_linear(4), fb)
    lin = from_mel(mel, fb)
    assert lin.scale == "linear" and lin.bins == 513
    assert np.all(lin.magnitudes >= 0)
    zero = from_mel(mel.with_magnitudes(np.zeros_like(mel.magnitudes)), fb)
    assert not np.any(zero.magnitudes)


def _roundtrip_error(mel: Spectrogram, fb: MelFilterbank) -> float:
    back = to_mel(from_mel(mel, fb), fb)
    err = np.sum(np.abs(back.magnitudes - mel.magnitudes))
    return float(err / np.sum(mel.magnitudes))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_from_mel_roundtrip(seed: int):
    fb = mel_filterbank(64, 1024, SR)
    assert _roundtrip_error(to_mel(_linear(4, seed), fb), fb) < 0.05
    rng = np.random.default_rng(seed)
    mags = rng.uniform(0, 1, (4, 64))
    mel = Spectrogram(mags, PARAMS, SR, scale="mel", mel_bins=64)
    assert _roundtrip_error(mel, fb) < 0.05


def test_from_mel_nnls_roundtrip():
    fb = mel_filterbank(64, 1024, SR)
    mel = to_mel(_linear(2, seed=3), fb)
    back = to_mel(from_mel(mel, fb, "nnls"), fb)
    err = np.sum(np.abs(back.magnitudes - mel.magnitudes))
    assert err / np.sum(mel.magnitudes) < 0.05


def test_filterbank_mismatch():
    fb = mel_filterbank(64, 1024, SR)
    other = mel_filterbank(40, 1024, SR)
    mel = to_mel(_linear(2), fb)
    with pytest.raises(ContractError):
        to_mel(mel, fb)
    with pytest.raises(ContractError):
        from_mel(mel, other)
