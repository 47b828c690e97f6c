"""
Conversion between spectrograms and normalised fixed-size images.

Pixels are stored as a (channels, height, width) array whose row index
is the frequency bin (row 0 is the lowest frequency) and whose column
index is the time frame.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from spectrans.core.errors import ConfigError, ContractError, FormatError
from spectrans.dsp.stft import Spectrogram, StftParams

LOG_EPSILON = 1e-5
DEFAULT_DB_FLOOR = -80.0
DEFAULT_DB_CEILING = 50.0
FLOAT_PLANE_DTYPE = np.dtype("<f4")


@dataclass(frozen=True, eq=False)
class SpectroImage:
    """
    A log-compressed spectrogram image with pixels in [-1, 1].

    Attributes:
        pixels: Array of shape (channels, height, width).
        db_floor: Level (in dB) mapped to -1.
        db_ceiling: Level (in dB) mapped to +1.
    """

    pixels: np.ndarray
    db_floor: float = DEFAULT_DB_FLOOR
    db_ceiling: float = DEFAULT_DB_CEILING

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim == 2:
            pixels = pixels[None]
        if pixels.ndim != 3:
            raise ContractError("invalid_image", f"shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)):
            raise ContractError("invalid_image", "Non-finite pixels.")
        if np.any(np.abs(pixels) > 1.0):
            raise ContractError("invalid_image", "Pixels outside [-1, 1].")
        if self.db_floor >= self.db_ceiling:
            raise ConfigError(
                "invalid_db_range", f"{self.db_floor} >= {self.db_ceiling}"
            )
        object.__setattr__(self, "pixels", pixels)

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    def channel(self, i: int) -> "SpectroImage":
        return self.with_pixels(self.pixels[i : i + 1])

    def with_pixels(self, pixels: np.ndarray) -> "SpectroImage":
        return SpectroImage(pixels, self.db_floor, self.db_ceiling)


#####
##### Log compression
#####


def magnitudes_to_pixels(
    mags: np.ndarray, db_floor: float, db_ceiling: float
) -> np.ndarray:
    """
    Map magnitudes to [-1, 1] through `20 log10(mag + eps)`, clamped to
    `[db_floor, db_ceiling]`. The array is returned unchanged in shape.
    """
    db = 20.0 * np.log10(mags + LOG_EPSILON)
    db = np.clip(db, db_floor, db_ceiling)
    return 2.0 * (db - db_floor) / (db_ceiling - db_floor) - 1.0


def pixels_to_magnitudes(
    pixels: np.ndarray, db_floor: float, db_ceiling: float
) -> np.ndarray:
    db = (pixels + 1.0) / 2.0 * (db_ceiling - db_floor) + db_floor
    return np.maximum(10.0 ** (db / 20.0) - LOG_EPSILON, 0.0)


def to_image(
    s: Spectrogram,
    height: int,
    width: int,
    db_floor: float = DEFAULT_DB_FLOOR,
    db_ceiling: float = DEFAULT_DB_CEILING,
) -> SpectroImage:
    """
    Convert a mel spectrogram into a single-channel image.

    No resizing is performed: the spectrogram must have exactly `width`
    frames and `height` bins.
    """
    if s.scale != "mel" or s.bins != height or s.frames != width:
        raise ContractError(
            "image_shape_mismatch",
            f"Cannot image a {s.scale} spectrogram of shape "
            + f"{s.frames}x{s.bins} as {height}x{width}.",
        )
    pixels = magnitudes_to_pixels(s.magnitudes.T, db_floor, db_ceiling)
    return SpectroImage(pixels[None], db_floor, db_ceiling)


def from_image(
    img: SpectroImage,
    params: StftParams,
    sample_rate_hz: int,
    channel: int = 0,
) -> Spectrogram:
    """
    Invert `to_image` on one channel, yielding a mel spectrogram with
    `img.height` bins and `img.width` frames.
    """
    mags = pixels_to_magnitudes(
        img.pixels[channel], img.db_floor, img.db_ceiling
    )
    return Spectrogram(
        magnitudes=mags.T,
        params=params,
        sample_rate_hz=sample_rate_hz,
        scale="mel",
        mel_bins=img.height,
    )


#####
##### Linear frequency bands
#####


def _band_count(params: StftParams, height: int) -> int:
    n = params.fft_size // 2
    if n % height != 0:
        raise ConfigError(
            "invalid_band_height",
            f"{n} linear bins (Nyquist excluded) are not a multiple of "
            + f"the image height {height}.",
        )
    return n // height


def linear_bands(
    s: Spectrogram,
    height: int,
    db_floor: float = DEFAULT_DB_FLOOR,
    db_ceiling: float = DEFAULT_DB_CEILING,
) -> list[SpectroImage]:
    """
    Cut a linear spectrogram into single-channel images of `height` rows
    each, from the lowest band up. The Nyquist bin is not part of any
    band.
    """
    if s.scale != "linear":
        raise ContractError("not_linear", "Expected a linear spectrogram.")
    count = _band_count(s.params, height)
    pixels = magnitudes_to_pixels(s.magnitudes.T, db_floor, db_ceiling)
    return [
        SpectroImage(
            pixels[None, i * height : (i + 1) * height], db_floor, db_ceiling
        )
        for i in range(count)
    ]


def join_bands(
    bands: Sequence[SpectroImage],
    nyquist: np.ndarray,
    params: StftParams,
    sample_rate_hz: int,
) -> Spectrogram:
    """
    Reassemble a linear spectrogram from the output of `linear_bands`.

    Arguments:
        bands: Band images, lowest band first.
        nyquist: Magnitudes of the Nyquist bin, one per frame.
    """
    if len(bands) != _band_count(params, bands[0].height):
        raise ContractError(
            "band_count_mismatch", f"Got {len(bands)} bands for {params}."
        )
    rows = [
        pixels_to_magnitudes(b.pixels[0], b.db_floor, b.db_ceiling)
        for b in bands
    ]
    mags = np.concatenate(rows + [np.asarray(nyquist)[None]], axis=0)
    return Spectrogram(
        magnitudes=mags.T, params=params, sample_rate_hz=sample_rate_hz
    )


#####
##### Files
#####


def save_png(img: SpectroImage, path: Path) -> None:
    """
    Save an image as 8-bit grayscale PNG, with pixel value
    `round((v + 1) / 2 * 255)` and the frequency axis going upwards.
    Channels are stacked vertically, channel 0 on top.
    """
    levels = np.round((img.pixels + 1.0) / 2.0 * 255.0).astype(np.uint8)
    stacked = np.concatenate([c[::-1] for c in levels], axis=0)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(stacked).save(path, format="PNG")


def load_png(
    path: Path,
    channels: int = 1,
    db_floor: float = DEFAULT_DB_FLOOR,
    db_ceiling: float = DEFAULT_DB_CEILING,
) -> SpectroImage:
    """
    Load an image written by `save_png` (up to 8-bit quantisation).
    """
    with Image.open(path) as f:
        levels = np.asarray(f.convert("L"), dtype=np.float64)
    if levels.shape[0] % channels != 0:
        raise FormatError(
            "invalid_png_layout",
            f"{path}: height {levels.shape[0]} is not a multiple of "
            + f"{channels} channels.",
        )
    blocks = np.split(levels, channels, axis=0)
    pixels = np.stack([b[::-1] for b in blocks]) / 255.0 * 2.0 - 1.0
    return SpectroImage(pixels, db_floor, db_ceiling)


def save_planes(img: SpectroImage, path: Path) -> None:
    """
    Save pixels losslessly as raw little-endian float32 planes, in
    (channel, row, column) order.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(img.pixels.astype(FLOAT_PLANE_DTYPE).tobytes())


def load_planes(
    path: Path,
    channels: int,
    height: int,
    db_floor: float = DEFAULT_DB_FLOOR,
    db_ceiling: float = DEFAULT_DB_CEILING,
) -> SpectroImage:
    """
    Load planes written by `save_planes`. The width is deduced from the
    file size.
    """
    data = np.frombuffer(path.read_bytes(), dtype=FLOAT_PLANE_DTYPE)
    per_column = channels * height
    if data.size == 0 or data.size % per_column != 0:
        raise FormatError(
            "invalid_planes",
            f"{path}: {data.size} values for {channels}x{height} planes.",
        )
    pixels = data.astype(np.float64).reshape(channels, height, -1)
    return SpectroImage(np.clip(pixels, -1.0, 1.0), db_floor, db_ceiling)


def load_image(
    path: Path,
    channels: int,
    height: int,
    db_floor: float = DEFAULT_DB_FLOOR,
    db_ceiling: float = DEFAULT_DB_CEILING,
) -> SpectroImage:
    """
    Load a `.png` or `.f32` image file.
    """
    if path.suffix == ".png":
        return load_png(path, channels, db_floor, db_ceiling)
    if path.suffix == ".f32":
        return load_planes(path, channels, height, db_floor, db_ceiling)
    raise FormatError("unknown_image_format", str(path))
