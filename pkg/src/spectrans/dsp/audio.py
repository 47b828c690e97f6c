"""
Waveforms, WAV files, companding, chunking and resampling.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io.wavfile as wavfile
import scipy.signal as sps

from spectrans.core.errors import (
    ConfigError,
    DegenerateInputError,
    FormatError,
    UnsupportedError,
)

PCM16_SCALE = 32768.0


@dataclass(frozen=True, eq=False)
class Waveform:
    """
    A mono audio signal.

    Attributes:
        samples: One-dimensional float64 array with nominal range
            [-1, 1]. All samples are finite.
        sample_rate_hz: Sample rate in Hz.
    """

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ConfigError(
                "invalid_waveform", f"Expected 1-D samples: {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ConfigError("invalid_waveform", "Non-finite samples.")
        if self.sample_rate_hz < 1:
            raise ConfigError(
                "invalid_waveform",
                f"Invalid sample rate: {self.sample_rate_hz}.",
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples, self.sample_rate_hz)

    def fitted(self, n: int) -> "Waveform":
        """
        Crop or zero-pad to exactly `n` samples.
        """
        out = np.zeros(n)
        m = min(n, len(self.samples))
        out[:m] = self.samples[:m]
        return self.with_samples(out)


def ms_to_samples(ms: float, sample_rate_hz: int) -> int:
    return int(round(ms * sample_rate_hz / 1000.0))


#####
##### WAV files
#####


def read_wav(path: Path) -> Waveform:
    """
    Read a PCM-16 or float-32 WAV file, averaging stereo to mono.

    Raises:
        FormatError: the file is not a well-formed RIFF/WAVE file.
        UnsupportedError: the encoding is not PCM-16 or float-32, or the
            file has more than two channels.
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as e:
        raise FormatError("malformed_wav", f"{path}: {e}")
    if data.dtype == np.int16:
        values = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        values = data.astype(np.float64)
    else:
        raise UnsupportedError(
            "unsupported_wav_encoding",
            f"{path}: sample type {data.dtype} is not supported.",
        )
    if values.ndim == 2:
        if values.shape[1] > 2:
            raise UnsupportedError(
                "unsupported_wav_channels",
                f"{path}: {values.shape[1]} channels.",
            )
        values = values.mean(axis=1)
    return Waveform(values, int(rate))


def write_wav(w: Waveform, path: Path) -> None:
    """
    Write a mono PCM-16 WAV file. Samples outside [-1, 1] are clipped.
    """
    clipped = np.clip(w.samples, -1.0, 1.0)
    pcm = np.clip(np.round(clipped * PCM16_SCALE), -32768, 32767)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(path, w.sample_rate_hz, pcm.astype(np.int16))


#####
##### Level and segmentation
#####


def normalize_peak(w: Waveform, peak: float = 0.9) -> Waveform:
    """
    Scale a waveform so that its maximum absolute sample equals `peak`.
    """
    if not 0 < peak <= 1:
        raise ConfigError("invalid_peak", f"Peak must be in (0, 1]: {peak}")
    current = float(np.max(np.abs(w.samples))) if len(w) else 0.0
    if current == 0.0:
        raise DegenerateInputError(
            "silent_waveform", "Cannot normalize an all-zero waveform."
        )
    return w.with_samples(w.samples * (peak / current))


def chunk_count(n_samples: int, chunk_len: int, hop_len: int) -> int:
    return math.ceil(max(n_samples - chunk_len, 0) / hop_len) + 1


def chunk(w: Waveform, chunk_ms: float, hop_ms: float) -> list[Waveform]:
    """
    Cut a waveform into fixed-length chunks. The final partial chunk is
    zero-padded to full length.
    """
    if chunk_ms < hop_ms or hop_ms <= 0:
        raise ConfigError(
            "invalid_chunking",
            f"Need chunk_ms >= hop_ms > 0 (got {chunk_ms}, {hop_ms}).",
        )
    if len(w) == 0:
        raise DegenerateInputError("empty_waveform", "Nothing to chunk.")
    chunk_len = ms_to_samples(chunk_ms, w.sample_rate_hz)
    hop_len = ms_to_samples(hop_ms, w.sample_rate_hz)
    count = chunk_count(len(w), chunk_len, hop_len)
    padded = np.zeros((count - 1) * hop_len + chunk_len)
    padded[: len(w)] = w.samples
    return [
        w.with_samples(padded[i * hop_len : i * hop_len + chunk_len])
        for i in range(count)
    ]


#####
##### Resampling
#####


def _resampled_positions(w: Waveform, target_hz: int) -> np.ndarray:
    if target_hz < 1:
        raise ConfigError("invalid_rate", f"Invalid target rate {target_hz}.")
    if len(w) == 0:
        raise DegenerateInputError("empty_waveform", "Nothing to resample.")
    n_out = int(round(len(w) * target_hz / w.sample_rate_hz))
    return np.arange(n_out) * (w.sample_rate_hz / target_hz)


def resample_linear(w: Waveform, target_hz: int) -> Waveform:
    """
    Resample with two-point linear interpolation.
    """
    pos = _resampled_positions(w, target_hz)
    out = np.interp(pos, np.arange(len(w)), w.samples)
    return Waveform(out, target_hz)


def resample_cubic(w: Waveform, target_hz: int) -> Waveform:
    """
    Resample by evaluating the interpolating uniform cubic B-spline of
    the input samples.
    """
    pos = _resampled_positions(w, target_hz)
    coeffs = sps.cspline1d(w.samples)
    out = sps.cspline1d_eval(coeffs, pos, dx=1.0, x0=0.0)
    return Waveform(out, target_hz)


def decimate(w: Waveform, target_hz: int) -> Waveform:
    """
    Anti-aliased polyphase rate conversion (used to produce band-limited
    inputs, as opposed to the interpolation baselines above).
    """
    g = math.gcd(target_hz, w.sample_rate_hz)
    up, down = target_hz // g, w.sample_rate_hz // g
    return Waveform(sps.resample_poly(w.samples, up, down), target_hz)


#####
##### Mu-law companding
#####


def _mu(channels: int) -> float:
    if channels < 2:
        raise ConfigError(
            "invalid_mu_law_channels", f"Need at least 2 channels: {channels}"
        )
    return float(channels - 1)


def mu_law_encode(x: np.ndarray | float, channels: int = 256) -> np.ndarray:
    """
    Map amplitudes in [-1, 1] (clamped) to class indices in
    `[0, channels)`. With 256 channels, 0.0 maps to class 128.
    """
    mu = _mu(channels)
    x = np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0)
    y = np.sign(x) * np.log1p(mu * np.abs(x)) / np.log1p(mu)
    return np.floor((y + 1.0) / 2.0 * mu + 0.5).astype(np.int64)


def mu_law_decode(c: np.ndarray | int, channels: int = 256) -> np.ndarray:
    """
    Map class indices back to amplitudes in [-1, 1].
    """
    mu = _mu(channels)
    y = 2.0 * np.asarray(c, dtype=np.float64) / mu - 1.0
    return np.sign(y) * np.expm1(np.abs(y) * np.log1p(mu)) / mu


def mu_law_requantize(x: np.ndarray | float, channels: int = 256):
    return mu_law_decode(mu_law_encode(x, channels), channels)


def mix(stems: Sequence[Waveform], gains: Sequence[float]) -> Waveform:
    """
    Sum equally long stems with the given gains.
    """
    assert stems and len(stems) == len(gains)
    rate = stems[0].sample_rate_hz
    total = np.zeros(len(stems[0]))
    for s, g in zip(stems, gains):
        assert len(s) == len(total) and s.sample_rate_hz == rate
        total = total + g * s.samples
    return Waveform(total, rate)
