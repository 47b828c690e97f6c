from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from spectrans.core.errors import ContractError, FormatError
from spectrans.dsp.images import (
    SpectroImage,
    from_image,
    join_bands,
    linear_bands,
    load_image,
    load_png,
    load_planes,
    save_png,
    save_planes,
    to_image,
)
from spectrans.dsp.stft import Spectrogram, StftParams

SR = 16000
PARAMS = StftParams()


def _mel(mags: np.ndarray) -> Spectrogram:
    return Spectrogram(
        mags, PARAMS, SR, scale="mel", mel_bins=mags.shape[1]
    )


def _image(seed: int = 0, channels: int = 1) -> SpectroImage:
    rng = np.random.default_rng(seed)
    return SpectroImage(rng.uniform(-1, 1, (channels, 8, 6)))


#####
##### Log compression
#####


def test_floor_and_ceiling():
    mags = np.zeros((4, 8))
    mags[0, 0] = 10 ** (50 / 20) - 1e-5
    mags[1, 1] = 1e6
    img = to_image(_mel(mags), 8, 4)
    assert img.pixels.shape == (1, 8, 4)
    assert img.pixels[0, 0, 0] == pytest.approx(1.0)
    assert img.pixels[0, 1, 1] == 1.0
    assert img.pixels[0, 2, 0] == -1.0


def test_roundtrip_above_floor():
    rng = np.random.default_rng(1)
    db = rng.uniform(-70, 40, (6, 8))
    mags = 10 ** (db / 20)
    img = to_image(_mel(mags), 8, 6)
    back = from_image(img, PARAMS, SR)
    assert back.scale == "mel"
    assert np.allclose(back.magnitudes, mags, rtol=1e-6)


def test_to_image_shape_mismatch():
    with pytest.raises(ContractError):
        to_image(_mel(np.ones((5, 8))), 8, 6)
    with pytest.raises(ContractError):
        to_image(Spectrogram(np.ones((6, 513)), PARAMS, SR), 513, 6)


@pytest.mark.parametrize(
    "pixels",
    [np.full((1, 2, 2), 1.5), np.zeros((2, 2, 2, 2)), np.full((2, 2), np.nan)],
)
def test_invalid_image(pixels: np.ndarray):
    with pytest.raises(ContractError):
        SpectroImage(pixels)


def test_two_dimensional_pixels_are_promoted():
    assert SpectroImage(np.zeros((3, 4))).pixels.shape == (1, 3, 4)


#####
##### Linear bands
#####


def test_linear_bands_roundtrip():
    rng = np.random.default_rng(2)
    db = rng.uniform(-60, 30, (5, PARAMS.linear_bins))
    s = Spectrogram(10 ** (db / 20), PARAMS, SR)
    bands = linear_bands(s, 64)
    assert len(bands) == 8
    assert all(b.pixels.shape == (1, 64, 5) for b in bands)
    back = join_bands(bands, s.magnitudes[:, -1], PARAMS, SR)
    assert np.allclose(back.magnitudes, s.magnitudes, rtol=1e-6)


def test_join_bands_count():
    s = Spectrogram(np.ones((5, PARAMS.linear_bins)), PARAMS, SR)
    bands = linear_bands(s, 64)
    with pytest.raises(ContractError):
        join_bands(bands[:-1], s.magnitudes[:, -1], PARAMS, SR)


#####
##### Files
#####


def test_png_roundtrip(tmp_path: Path):
    img = _image(channels=3)
    path = tmp_path / "img.png"
    save_png(img, path)
    back = load_png(path, channels=3)
    assert back.pixels.shape == img.pixels.shape
    assert np.max(np.abs(back.pixels - img.pixels)) <= 1 / 255 + 1e-9


def test_png_layout(tmp_path: Path):
    pixels = -np.ones((2, 4, 3))
    pixels[0, 0, :] = 1.0
    path = tmp_path / "layout.png"
    save_png(SpectroImage(pixels), path)
    with Image.open(path) as f:
        levels = np.asarray(f)
    assert levels.shape == (8, 3)
    # Lowest frequency row of channel 0 is the bottom of the top block.
    assert np.all(levels[3] == 255)
    assert np.all(levels[:3] == 0) and np.all(levels[4:] == 0)


def test_planes_are_lossless(tmp_path: Path):
    img = _image(seed=4, channels=2)
    path = tmp_path / "img.f32"
    save_planes(img, path)
    back = load_planes(path, 2, 8)
    expected = img.pixels.astype(np.float32).astype(np.float64)
    assert np.array_equal(back.pixels, expected)


def test_load_image_dispatch(tmp_path: Path):
    img = _image(seed=5)
    save_planes(img, tmp_path / "a.f32")
    save_png(img, tmp_path / "a.png")
    assert load_image(tmp_path / "a.f32", 1, 8).width == 6
    assert load_image(tmp_path / "a.png", 1, 8).width == 6
    with pytest.raises(FormatError):
        load_image(tmp_path / "a.jpg", 1, 8)


def test_truncated_planes(tmp_path: Path):
    path = tmp_path / "bad.f32"
    path.write_bytes(np.zeros(7, dtype="<f4").tobytes())
    with pytest.raises(FormatError):
        load_planes(path, 1, 8)
