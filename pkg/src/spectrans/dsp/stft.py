"""
Short-time Fourier analysis and synthesis, and Griffin-Lim phase
reconstruction.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
import scipy.signal as sps
from pydantic import ConfigDict

from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
)
from spectrans.dsp.audio import Waveform, ms_to_samples

COLA_TOLERANCE = 1e-6


@dataclass(frozen=True)
class StftParams:
    """
    STFT parameters.

    Attributes:
        fft_size: DFT size; each windowed frame is zero-padded to it.
        window_length: Number of samples in each analysis window.
        hop: Frame advance in samples.
        window_kind: Analysis window (periodic Hann).
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    fft_size: int = 1024
    window_length: int = 776
    hop: int = 388
    window_kind: Literal["hann"] = "hann"

    def __post_init__(self):
        if min(self.fft_size, self.window_length, self.hop) < 1:
            raise ConfigError("invalid_stft_params", str(self))
        if self.window_length > self.fft_size:
            raise ConfigError(
                "invalid_stft_params", "window_length exceeds fft_size"
            )
        if self.hop > self.window_length:
            raise ConfigError(
                "invalid_stft_params", "hop exceeds window_length"
            )

    @property
    def linear_bins(self) -> int:
        return self.fft_size // 2 + 1


FULL_SCALE_STFT = StftParams(fft_size=1024, window_length=640, hop=49)
"""
Full-scale analysis settings (hop of 49 samples at 16 kHz). They do not
satisfy the constant-overlap-add condition and are thus analysis-only.
"""


def desk_stft(sample_rate_hz: int, chunk_ms: float, width: int) -> StftParams:
    """
    Derive STFT parameters whose frames exactly fill `width` image
    columns for one chunk: hop = ceil(chunk_samples / width), a Hann
    window of two hops (COLA at 50% overlap), and the smallest power of
    two holding the window as DFT size.
    """
    chunk_samples = ms_to_samples(chunk_ms, sample_rate_hz)
    hop = max(1, math.ceil(chunk_samples / width))
    window_length = 2 * hop
    fft_size = 1 << (window_length - 1).bit_length()
    return StftParams(fft_size=fft_size, window_length=window_length, hop=hop)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """
    A time-frequency magnitude grid.

    Attributes:
        magnitudes: Array of shape (frames, bins), non-negative.
        phases: Optional array of the same shape, in (-pi, pi].
        scale: Whether bins are linear DFT bins or mel bins.
        params: The STFT parameters the grid was computed with.
        sample_rate_hz: Sample rate of the analysed signal.
        mel_bins: Number of mel bins (mel scale only).
    """

    magnitudes: np.ndarray
    params: StftParams
    sample_rate_hz: int
    scale: Literal["linear", "mel"] = "linear"
    phases: np.ndarray | None = None
    mel_bins: int | None = None

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.ndim != 2:
            raise ContractError("invalid_spectrogram", f"shape {mags.shape}")
        if not np.all(np.isfinite(mags)) or np.any(mags < 0):
            raise ContractError(
                "invalid_spectrogram", "Magnitudes must be finite and >= 0."
            )
        if self.scale == "linear":
            expected = self.params.linear_bins
        else:
            expected = self.mel_bins
        if mags.shape[1] != expected:
            raise ContractError(
                "invalid_spectrogram",
                f"{self.scale} spectrogram with {mags.shape[1]} bins, "
                + f"expected {expected}.",
            )
        if self.phases is not None and self.phases.shape != mags.shape:
            raise ContractError(
                "invalid_spectrogram", "Phases and magnitudes differ in shape."
            )
        object.__setattr__(self, "magnitudes", mags)

    @property
    def frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def bins(self) -> int:
        return self.magnitudes.shape[1]

    def with_magnitudes(
        self, magnitudes: np.ndarray, *, keep_phases: bool = False
    ) -> "Spectrogram":
        return replace(
            self,
            magnitudes=magnitudes,
            phases=self.phases if keep_phases else None,
        )

    def complex(self) -> np.ndarray:
        if self.phases is None:
            raise ContractError("missing_phases", "Spectrogram has no phases.")
        return self.magnitudes * np.exp(1j * self.phases)


#####
##### Analysis and synthesis
#####


def analysis_window(params: StftParams) -> np.ndarray:
    return sps.get_window(params.window_kind, params.window_length)


def check_cola(params: StftParams) -> None:
    """
    Raise `ConfigError` if the window and hop violate the
    constant-overlap-add condition.
    """
    win = analysis_window(params)
    noverlap = params.window_length - params.hop
    ok = sps.check_COLA(win, params.window_length, noverlap, COLA_TOLERANCE)
    if not ok:
        raise ConfigError(
            "cola_violation",
            "Window and hop do not satisfy the constant-overlap-add "
            + "condition, overlap-add synthesis is not available.",
            meta=params,
        )


def frame_count(n_samples: int, params: StftParams) -> int:
    return 1 + (n_samples - params.window_length) // params.hop


def framed_length(n_frames: int, params: StftParams) -> int:
    """
    Signal length covered by exactly `n_frames` frames.
    """
    return (n_frames - 1) * params.hop + params.window_length


def _frames_dft(samples: np.ndarray, params: StftParams) -> np.ndarray:
    frames = np.lib.stride_tricks.sliding_window_view(
        samples, params.window_length
    )[:: params.hop]
    return np.fft.rfft(
        frames * analysis_window(params), n=params.fft_size, axis=1
    )


def stft(w: Waveform, params: StftParams) -> Spectrogram:
    """
    Windowed DFT of successive frames, with magnitudes and phases.
    """
    if len(w) < params.window_length:
        raise DegenerateInputError(
            "input_too_short",
            f"{len(w)} samples, window length {params.window_length}.",
        )
    spectrum = _frames_dft(w.samples, params)
    return Spectrogram(
        magnitudes=np.abs(spectrum),
        phases=np.angle(spectrum),
        params=params,
        sample_rate_hz=w.sample_rate_hz,
    )


def _overlap_add(spectrum: np.ndarray, params: StftParams) -> np.ndarray:
    win = analysis_window(params)
    n_frames = spectrum.shape[0]
    frames = np.fft.irfft(spectrum, n=params.fft_size, axis=1)
    frames = frames[:, : params.window_length] * win
    out = np.zeros(framed_length(n_frames, params))
    norm = np.zeros_like(out)
    for t in range(n_frames):
        start = t * params.hop
        out[start : start + params.window_length] += frames[t]
        norm[start : start + params.window_length] += win**2
    nonzero = norm > 1e-10
    out[nonzero] /= norm[nonzero]
    out[~nonzero] = 0.0
    return out


def istft(s: Spectrogram) -> Waveform:
    """
    Overlap-add synthesis with window-squared normalisation.
    """
    if s.scale != "linear":
        raise ContractError(
            "not_linear", "istft expects a linear spectrogram."
        )
    spectrum = s.complex()
    check_cola(s.params)
    return Waveform(_overlap_add(spectrum, s.params), s.sample_rate_hz)


#####
##### Griffin-Lim
#####


def spectral_convergence(mag: np.ndarray, ref: np.ndarray) -> float:
    """
    Frobenius norm of `mag - ref` relative to that of `ref`.
    """
    if mag.shape != ref.shape:
        raise ContractError(
            "shape_mismatch", meta={"mag": mag.shape, "ref": ref.shape}
        )
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0.0:
        raise DegenerateInputError("zero_reference", "Reference is all zero.")
    return float(np.linalg.norm(mag - ref)) / ref_norm


def griffin_lim(
    mags: Spectrogram,
    iterations: int,
    *,
    on_iteration: Callable[[int, float], None] | None = None,
) -> Waveform:
    """
    Estimate a waveform whose STFT magnitudes match `mags`.

    Phases start at zero. Each iteration synthesises a signal, analyses
    it again and keeps the resulting phases with the target magnitudes.

    Arguments:
        mags: Linear-scale magnitudes (phases, if any, are ignored).
        iterations: Number of iterations (at least 1).
        on_iteration: Called after each iteration with its one-based index
            and the spectral convergence of the current estimate.
    """
    if iterations < 1:
        raise ConfigError("invalid_iterations", str(iterations))
    if mags.scale != "linear":
        raise ContractError(
            "not_linear", "griffin_lim expects a linear spectrogram."
        )
    check_cola(mags.params)
    target = mags.magnitudes
    silent = not np.any(target)
    spectrum = target.astype(np.complex128)
    for i in range(iterations):
        x = _overlap_add(spectrum, mags.params)
        rebuilt = _frames_dft(x, mags.params)
        if on_iteration is not None:
            conv = 0.0 if silent else spectral_convergence(
                np.abs(rebuilt), target
            )
            on_iteration(i + 1, conv)
        spectrum = target * np.exp(1j * np.angle(rebuilt))
    return Waveform(_overlap_add(spectrum, mags.params), mags.sample_rate_hz)


#####
##### Framing audio for fixed-width images
#####


def analyze_frames(
    w: Waveform, params: StftParams, n_frames: int | None = None
) -> Spectrogram:
    """
    STFT with frames centred on multiples of the hop.

    The signal is padded with `window_length // 2` zeros on the left and
    zero-padded or cropped on the right so that exactly `n_frames` frames
    result (by default, enough frames to cover the whole signal).
    """
    if n_frames is None:
        n_frames = max(1, math.ceil(len(w) / params.hop))
    left = params.window_length // 2
    total = framed_length(n_frames, params)
    padded = np.zeros(total)
    body = w.samples[: max(0, total - left)]
    padded[left : left + len(body)] = body
    return stft(w.with_samples(padded), params)


def strip_framing(x: Waveform, params: StftParams, n_samples: int):
    """
    Invert the padding of `analyze_frames`, returning `n_samples`
    samples.
    """
    left = params.window_length // 2
    return x.with_samples(x.samples[left:]).fitted(n_samples)
