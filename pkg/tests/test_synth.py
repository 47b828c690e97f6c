import numpy as np
import pytest

from spectrans.core.errors import ConfigError, DegenerateInputError
from spectrans.datagen.scores import NoteEvent
from spectrans.datagen.synth import (
    RENDER_PEAK,
    TimbreConfig,
    random_timbre,
    render_blueprint,
    render_instrument,
)
from spectrans.dsp.audio import Waveform

SR = 16000
A4 = [NoteEvent(0.0, 1000.0, 69)]


def _peak_hz(w: Waveform) -> float:
    spectrum = np.abs(np.fft.rfft(w.samples))
    return float(np.argmax(spectrum)) * w.sample_rate_hz / len(w)


def test_blueprint_fundamental():
    w = render_blueprint(A4, SR, n_partials=1)
    assert len(w) == SR
    assert np.max(np.abs(w.samples)) == pytest.approx(RENDER_PEAK)
    assert _peak_hz(w) == pytest.approx(440.0)


def test_blueprint_partials_are_equal():
    w = render_blueprint(A4, SR, n_partials=3)
    spectrum = np.abs(np.fft.rfft(w.samples))
    levels = spectrum[[440, 880, 1320]]
    assert np.allclose(levels / levels[0], 1.0, atol=0.05)


def test_blueprint_length():
    w = render_blueprint(A4, SR, length=4000)
    assert len(w) == 4000
    with pytest.raises(ConfigError):
        render_blueprint(A4, SR, n_partials=0)


def test_instrument_is_deterministic():
    timbre = TimbreConfig(seed=3)
    a = render_instrument(A4, timbre, SR)
    b = render_instrument(A4, timbre, SR)
    assert np.array_equal(a.samples, b.samples)
    assert np.max(np.abs(a.samples)) == pytest.approx(RENDER_PEAK)
    other = render_instrument(A4, TimbreConfig(seed=4), SR)
    assert not np.array_equal(a.samples, other.samples)


def test_instrument_pitch():
    timbre = TimbreConfig(noise_level=0.0, vibrato_depth_cents=0.0)
    w = render_instrument(A4, timbre, SR)
    assert _peak_hz(w) == pytest.approx(440.0)


def test_partials_above_nyquist_are_skipped():
    high = [NoteEvent(0.0, 500.0, 105)]
    w = render_blueprint(high, 8000, n_partials=6)
    assert np.all(np.isfinite(w.samples))
    assert _peak_hz(w) == pytest.approx(3520.0, abs=4.0)


def test_empty_score():
    with pytest.raises(DegenerateInputError):
        render_blueprint([], SR)
    with pytest.raises(DegenerateInputError):
        render_instrument([], TimbreConfig(), SR)


@pytest.mark.parametrize(
    "amps", [(), (0.0, 0.0), (1.0, -0.5), (1.0, float("nan"))]
)
def test_invalid_timbre(amps: tuple[float, ...]):
    with pytest.raises(ConfigError):
        TimbreConfig(harmonic_amps=amps)


def test_random_timbre():
    assert random_timbre(5) == random_timbre(5)
    assert random_timbre(5) != random_timbre(6)
    assert len(random_timbre(5, n_partials=4).harmonic_amps) == 4
