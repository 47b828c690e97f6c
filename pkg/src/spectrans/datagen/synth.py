"""
Additive synthesis of note scores: sine blueprints and synthetic
instruments.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cache

import numpy as np
import scipy.signal as sps
from pydantic import ConfigDict

from spectrans.core.errors import ConfigError, DegenerateInputError
from spectrans.datagen.scores import NoteEvent, score_duration_ms
from spectrans.dsp.audio import Waveform, ms_to_samples, normalize_peak
from spectrans.utils.misc import derived_seed

RENDER_PEAK = 0.9
BLUEPRINT_RAMP_MS = 10.0
NOISE_CUTOFF_HZ = 3000.0


@dataclass(frozen=True)
class TimbreConfig:
    """
    The sound of a synthetic instrument.

    Attributes:
        harmonic_amps: Relative amplitudes of the partials, starting
            with the fundamental.
        vibrato_rate_hz: Frequency of the sinusoidal vibrato.
        vibrato_depth_cents: Peak pitch deviation of the vibrato.
        attack_ms: Duration of the linear attack ramp.
        release_ms: Duration of the linear release ramp.
        noise_level: Amplitude of the low-passed breath noise, relative
            to the note velocity.
        seed: Seed of the noise generator.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    harmonic_amps: tuple[float, ...] = (1.0, 0.6, 0.45, 0.3, 0.2, 0.12)
    vibrato_rate_hz: float = 5.5
    vibrato_depth_cents: float = 20.0
    attack_ms: float = 40.0
    release_ms: float = 80.0
    noise_level: float = 0.01
    seed: int = 0

    def __post_init__(self):
        amps = np.asarray(self.harmonic_amps, dtype=np.float64)
        if amps.size == 0 or not np.all(np.isfinite(amps)):
            raise ConfigError("invalid_timbre", "Need finite harmonic_amps.")
        if np.any(amps < 0) or not np.any(amps > 0):
            raise ConfigError(
                "invalid_timbre", "Amplitudes must be >= 0, not all zero."
            )
        if min(self.attack_ms, self.release_ms, self.noise_level) < 0:
            raise ConfigError("invalid_timbre", str(self))


def random_timbre(seed: int, n_partials: int = 8) -> TimbreConfig:
    """
    Draw a timbre with decaying partials, used to make interference
    voices distinct from the target instrument.
    """
    rng = np.random.default_rng(seed)
    slope = rng.uniform(0.5, 1.5)
    amps = [
        round(float(rng.uniform(0.3, 1.0) / k**slope), 4)
        for k in range(1, n_partials + 1)
    ]
    return TimbreConfig(
        harmonic_amps=tuple(amps),
        vibrato_rate_hz=round(float(rng.uniform(4.0, 7.0)), 3),
        vibrato_depth_cents=round(float(rng.uniform(5.0, 30.0)), 3),
        attack_ms=round(float(rng.uniform(5.0, 60.0)), 3),
        release_ms=round(float(rng.uniform(20.0, 150.0)), 3),
        noise_level=round(float(rng.uniform(0.0, 0.03)), 4),
        seed=seed,
    )


#####
##### Rendering utilities
#####


def _envelope(n: int, attack: int, release: int) -> np.ndarray:
    idx = np.arange(n, dtype=np.float64)
    env = np.ones(n)
    if attack > 0:
        env = np.minimum(env, idx / attack)
    if release > 0:
        env = np.minimum(env, (n - idx) / release)
    return np.clip(env, 0.0, 1.0)


def _phase(inst_freq: np.ndarray, sr: int) -> np.ndarray:
    """
    Integrate an instantaneous frequency (in Hz) into a phase starting
    at zero.
    """
    steps = np.concatenate([[0.0], np.cumsum(inst_freq[:-1])])
    return 2 * np.pi * steps / sr


def _partials(
    phase: np.ndarray, f0: float, amps: Sequence[float], sr: int
) -> np.ndarray:
    out = np.zeros_like(phase)
    for k, a in enumerate(amps, start=1):
        if k * f0 >= sr / 2:
            break
        if a > 0:
            out += a * np.sin(k * phase)
    return out


@cache
def _noise_filter(sr: int) -> tuple[np.ndarray, np.ndarray]:
    cutoff = min(NOISE_CUTOFF_HZ, 0.45 * sr)
    b, a = sps.butter(2, cutoff / (sr / 2), btype="low")
    return b, a


def _buffer(notes: Sequence[NoteEvent], sr: int, length: int | None):
    if not notes:
        raise DegenerateInputError("empty_score", "Nothing to render.")
    if length is None:
        length = ms_to_samples(score_duration_ms(notes), sr)
    return np.zeros(length)


def _note_span(note: NoteEvent, sr: int, length: int) -> tuple[int, int]:
    start = ms_to_samples(note.onset_ms, sr)
    n = min(ms_to_samples(note.duration_ms, sr), length - start)
    return start, max(n, 0)


#####
##### Renderers
#####


def render_blueprint(
    notes: Sequence[NoteEvent],
    sr: int,
    n_partials: int = 6,
    *,
    ramp_ms: float = BLUEPRINT_RAMP_MS,
    length: int | None = None,
) -> Waveform:
    """
    Render a harmonic blueprint: the sum of `n_partials` equal-amplitude
    sines at multiples of each note's fundamental, with linear onset and
    offset ramps. The result is peak-normalised to 0.9.

    Arguments:
        length: Number of samples to render (by default, up to the end
            of the last note).
    """
    if n_partials < 1:
        raise ConfigError("invalid_partials", str(n_partials))
    out = _buffer(notes, sr, length)
    ramp = ms_to_samples(ramp_ms, sr)
    for note in notes:
        start, n = _note_span(note, sr, len(out))
        if n == 0:
            continue
        phase = _phase(np.full(n, note.frequency_hz), sr)
        tone = _partials(phase, note.frequency_hz, [1.0] * n_partials, sr)
        env = _envelope(n, ramp, ramp)
        out[start : start + n] += note.velocity * tone * env
    return normalize_peak(Waveform(out, sr), RENDER_PEAK)


def render_instrument(
    notes: Sequence[NoteEvent],
    timbre: TimbreConfig,
    sr: int,
    *,
    length: int | None = None,
) -> Waveform:
    """
    Render a score with a synthetic instrument: additive partials with a
    sinusoidal vibrato on the fundamental, attack and release ramps and
    low-passed noise. The result is peak-normalised to 0.9 and is a
    deterministic function of the arguments.
    """
    out = _buffer(notes, sr, length)
    attack = ms_to_samples(timbre.attack_ms, sr)
    release = ms_to_samples(timbre.release_ms, sr)
    b, a = _noise_filter(sr)
    for i, note in enumerate(notes):
        start, n = _note_span(note, sr, len(out))
        if n == 0:
            continue
        t = np.arange(n) / sr
        cents = timbre.vibrato_depth_cents * np.sin(
            2 * np.pi * timbre.vibrato_rate_hz * t
        )
        inst_freq = note.frequency_hz * 2.0 ** (cents / 1200)
        phase = _phase(inst_freq, sr)
        tone = _partials(phase, note.frequency_hz, timbre.harmonic_amps, sr)
        if timbre.noise_level > 0:
            rng = np.random.default_rng(derived_seed(timbre.seed, i))
            noise = sps.lfilter(b, a, rng.standard_normal(n))
            tone = tone + timbre.noise_level * noise
        env = _envelope(n, attack, release)
        out[start : start + n] += note.velocity * tone * env
    return normalize_peak(Waveform(out, sr), RENDER_PEAK)
