"""
The audio front end shared by dataset generation, translation and
evaluation: chunk geometry, STFT parameters, mel filterbank and image
normalisation derived from one set of configuration values.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import ConfigDict

from spectrans.core.errors import ConfigError, ContractError
from spectrans.dsp.audio import Waveform, ms_to_samples
from spectrans.dsp.images import (
    DEFAULT_DB_CEILING,
    DEFAULT_DB_FLOOR,
    SpectroImage,
    from_image,
    join_bands,
    linear_bands,
    to_image,
)
from spectrans.dsp.mel import MelFilterbank, from_mel, mel_filterbank, to_mel
from spectrans.dsp.stft import (
    FULL_SCALE_STFT,
    Spectrogram,
    StftParams,
    analyze_frames,
    desk_stft,
    griffin_lim,
    strip_framing,
)


@dataclass(frozen=True)
class AudioConfig:
    """
    Attributes:
        sample_rate_hz: Sample rate of all audio.
        chunk_ms: Duration of the audio covered by one image.
        fmin_hz: Lower edge of the mel filterbank.
        fmax_hz: Upper edge of the mel filterbank (Nyquist by default).
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    sample_rate_hz: int = 16000
    chunk_ms: float = 1550.0
    fmin_hz: float = 0.0
    fmax_hz: float | None = None


@dataclass(frozen=True)
class ImageConfig:
    """
    Attributes:
        size: Height (mel bins) and width (frames) of images.
        db_floor: Level mapped to pixel -1.
        db_ceiling: Level mapped to pixel +1.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    size: int = 64
    db_floor: float = DEFAULT_DB_FLOOR
    db_ceiling: float = DEFAULT_DB_CEILING


type StftPreset = Literal["desk", "full"]


def resolve_stft(
    stft: StftPreset | StftParams, audio: AudioConfig, image: ImageConfig
) -> StftParams:
    """
    Resolve an STFT preset name into parameters. The `desk` preset
    derives a hop such that one chunk yields exactly `image.size` frames.
    """
    if isinstance(stft, StftParams):
        return stft
    if stft == "full":
        return FULL_SCALE_STFT
    return desk_stft(audio.sample_rate_hz, audio.chunk_ms, image.size)


class Frontend:
    """
    Conversions between waveforms, spectrograms and images under a fixed
    configuration.
    """

    def __init__(
        self,
        audio: AudioConfig,
        image: ImageConfig,
        stft: StftPreset | StftParams = "desk",
    ):
        self.audio = audio
        self.image = image
        self.params = resolve_stft(stft, audio, image)
        self.sample_rate_hz = audio.sample_rate_hz
        self.filterbank: MelFilterbank = mel_filterbank(
            image.size,
            self.params.fft_size,
            audio.sample_rate_hz,
            audio.fmin_hz,
            audio.fmax_hz,
        )

    @property
    def size(self) -> int:
        return self.image.size

    @property
    def chunk_samples(self) -> int:
        return ms_to_samples(self.audio.chunk_ms, self.sample_rate_hz)

    def check_rate(self, w: Waveform) -> None:
        if w.sample_rate_hz != self.sample_rate_hz:
            raise ContractError(
                "sample_rate_mismatch",
                f"Expected {self.sample_rate_hz} Hz, got {w.sample_rate_hz}.",
            )

    def linear(self, w: Waveform, n_frames: int | None = None) -> Spectrogram:
        self.check_rate(w)
        return analyze_frames(w, self.params, n_frames)

    def mel(self, w: Waveform, n_frames: int | None = None) -> Spectrogram:
        return to_mel(self.linear(w, n_frames), self.filterbank)

    def to_mel(self, s: Spectrogram) -> Spectrogram:
        return to_mel(s, self.filterbank)

    def from_mel(self, s: Spectrogram) -> Spectrogram:
        return from_mel(s, self.filterbank)

    def image_of(self, s: Spectrogram) -> SpectroImage:
        """
        Image a mel spectrogram of any frame count.
        """
        return to_image(
            s, self.size, s.frames, self.image.db_floor, self.image.db_ceiling
        )

    def chunk_image(self, chunk: Waveform) -> SpectroImage:
        """
        Image one chunk, which yields exactly `size` frames.
        """
        return self.image_of(self.mel(chunk, self.size))

    def bands(self, linear: Spectrogram) -> list[SpectroImage]:
        return linear_bands(
            linear, self.size, self.image.db_floor, self.image.db_ceiling
        )

    def join_bands(
        self, bands: Sequence[SpectroImage], nyquist: np.ndarray
    ) -> Spectrogram:
        return join_bands(bands, nyquist, self.params, self.sample_rate_hz)

    def spectrogram(self, img: SpectroImage, channel: int = 0) -> Spectrogram:
        if img.height != self.size:
            raise ContractError(
                "image_height_mismatch",
                f"Expected {self.size} mel bins, got {img.height}.",
            )
        return from_image(img, self.params, self.sample_rate_hz, channel)

    def griffin_lim(
        self,
        linear: Spectrogram,
        n_samples: int,
        iterations: int = 32,
        on_iteration: Callable[[int, float], None] | None = None,
    ) -> Waveform:
        """
        Reconstruct `n_samples` samples of audio from linear magnitudes
        computed by `linear`.
        """
        out = griffin_lim(linear, iterations, on_iteration=on_iteration)
        return strip_framing(out, self.params, n_samples)

    def samples_for(self, n_frames: int) -> int:
        """
        Number of audio samples spanned by `n_frames` frames.
        """
        if n_frames < 1:
            raise ConfigError("invalid_frame_count", str(n_frames))
        return n_frames * self.params.hop
