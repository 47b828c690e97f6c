"""
Mel filterbanks and linear/mel spectrogram conversion.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.optimize import nnls

from spectrans.core.errors import ConfigError, ContractError
from spectrans.dsp.stft import Spectrogram


def hz_to_mel(f: np.ndarray | float) -> np.ndarray:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    """
    Triangular mel filters.

    Attributes:
        weights: Array of shape (mel_bins, linear_bins), non-negative,
            each row a triangle (unimodal).
        fmin_hz: Lower edge of the first filter.
        fmax_hz: Upper edge of the last filter.
        sample_rate_hz: Sample rate the linear bins refer to.
    """

    weights: np.ndarray
    fmin_hz: float
    fmax_hz: float
    sample_rate_hz: int

    @property
    def mel_bins(self) -> int:
        return self.weights.shape[0]

    @property
    def linear_bins(self) -> int:
        return self.weights.shape[1]

    @cached_property
    def edges_hz(self) -> np.ndarray:
        """
        The `mel_bins + 2` filter edge frequencies; filter `j` rises from
        `edges_hz[j]`, peaks at `edges_hz[j + 1]` and falls to
        `edges_hz[j + 2]`.
        """
        mels = np.linspace(
            hz_to_mel(self.fmin_hz), hz_to_mel(self.fmax_hz), self.mel_bins + 2
        )
        return mel_to_hz(mels)

    @property
    def centers_hz(self) -> np.ndarray:
        return self.edges_hz[1:-1]

    @cached_property
    def pseudo_inverse(self) -> np.ndarray:
        return np.linalg.pinv(self.weights)


def mel_filterbank(
    mel_bins: int,
    fft_size: int,
    sr: int,
    fmin_hz: float = 0.0,
    fmax_hz: float | None = None,
) -> MelFilterbank:
    """
    Build area-normalised triangular filters whose centres are equally
    spaced on the mel scale `2595 * log10(1 + f / 700)`.

    A filter too narrow to contain any DFT bin collapses onto the bin
    nearest to its centre, so that every filter has a positive weight.
    """
    if fmax_hz is None:
        fmax_hz = sr / 2
    if mel_bins < 1 or not 0 <= fmin_hz < fmax_hz <= sr / 2:
        raise ConfigError(
            "invalid_mel_filterbank",
            meta={"mel_bins": mel_bins, "fmin": fmin_hz, "fmax": fmax_hz},
        )
    n_lin = fft_size // 2 + 1
    freqs = np.arange(n_lin) * sr / fft_size
    edges = mel_to_hz(
        np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), mel_bins + 2)
    )
    weights = np.zeros((mel_bins, n_lin))
    for j in range(mel_bins):
        lo, mid, hi = edges[j], edges[j + 1], edges[j + 2]
        rising = (freqs - lo) / (mid - lo)
        falling = (hi - freqs) / (hi - mid)
        tri = np.maximum(0.0, np.minimum(rising, falling))
        if not np.any(tri > 0):
            tri[int(np.argmin(np.abs(freqs - mid)))] = 1.0
        weights[j] = tri * (2.0 / (hi - lo))
    return MelFilterbank(weights, float(fmin_hz), float(fmax_hz), sr)


def _check_fb(s: Spectrogram, fb: MelFilterbank, scale: str, bins: int):
    if s.scale != scale or s.bins != bins:
        raise ContractError(
            "filterbank_mismatch",
            f"Expected a {scale} spectrogram with {bins} bins, "
            + f"got a {s.scale} one with {s.bins}.",
        )


def to_mel(s: Spectrogram, fb: MelFilterbank) -> Spectrogram:
    """
    Apply the filterbank to a linear spectrogram.
    """
    _check_fb(s, fb, "linear", fb.linear_bins)
    return Spectrogram(
        magnitudes=s.magnitudes @ fb.weights.T,
        params=s.params,
        sample_rate_hz=s.sample_rate_hz,
        scale="mel",
        mel_bins=fb.mel_bins,
    )


def from_mel(
    s: Spectrogram,
    fb: MelFilterbank,
    method: Literal["pinv", "nnls"] = "pinv",
) -> Spectrogram:
    """
    Rescale a mel spectrogram to linear frequency bins.

    With `pinv`, the precomputed pseudo-inverse is applied and negative
    values are clamped to zero. With `nnls`, each frame is solved as a
    non-negative least-squares problem (slower, exact on spectrograms
    produced by `to_mel`).
    """
    _check_fb(s, fb, "mel", fb.mel_bins)
    if method == "pinv":
        lin = np.maximum(s.magnitudes @ fb.pseudo_inverse.T, 0.0)
    else:
        lin = np.stack([nnls(fb.weights, frame)[0] for frame in s.magnitudes])
    return Spectrogram(
        magnitudes=lin,
        params=s.params,
        sample_rate_hz=s.sample_rate_hz,
        scale="linear",
    )
