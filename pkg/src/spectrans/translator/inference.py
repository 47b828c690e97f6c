"""
Application of trained generators to inputs of arbitrary length.
"""

from collections.abc import Sequence

import numpy as np

from spectrans.autodiff.layers import Module
from spectrans.autodiff.tensor import Tensor, no_grad
from spectrans.core.errors import ContractError
from spectrans.dsp.frontend import Frontend
from spectrans.dsp.images import SpectroImage
from spectrans.dsp.stft import Spectrogram
from spectrans.translator.models import Generator

PAD_PIXEL = -1.0


def _apply(G: Module, windows: np.ndarray) -> np.ndarray:
    with no_grad():
        return G(Tensor(windows)).values


def window_starts(width: int, size: int, hop: int) -> list[int]:
    """
    Start columns of the windows covering `width` columns.
    """
    starts = [0]
    while starts[-1] + size < width:
        starts.append(starts[-1] + hop)
    return starts


def crossfade_weights(size: int, first: bool, last: bool) -> np.ndarray:
    """
    Column weights of a window blended with half-overlapping neighbours:
    a linear ramp over each half that overlaps a neighbour, and full
    weight on the outer halves of the first and last windows. The
    weights of two overlapping windows sum to one.
    """
    half = size // 2
    up = (np.arange(half) + 0.5) / half
    w = np.ones(size)
    if not first:
        w[:half] = up
    if not last:
        w[size - half :] = up[::-1]
    return w


def translate_image(
    G: Generator, img: SpectroImage, overlap: bool = True
) -> SpectroImage:
    """
    Translate an image of any width by applying the generator to
    windows of its input width.

    With `overlap`, windows advance by half their width and their
    outputs are blended by linear crossfade; otherwise they are laid
    side by side. The last window is padded with silence (pixel -1) and
    the output is cropped to the input width.

    Raises:
        ContractError: the image height or channel count does not match
            the generator.
    """
    c = G.config
    s = c.image_size
    if img.height != s or img.channels != c.in_channels:
        raise ContractError(
            "shape_mismatch",
            f"Generator expects {c.in_channels}x{s} rows, "
            + f"got {img.channels}x{img.height}.",
        )
    width = img.width
    if width == s:
        out = _apply(G, img.pixels[None])[0]
        return SpectroImage(out, img.db_floor, img.db_ceiling)
    hop = s // 2 if overlap else s
    starts = window_starts(width, s, hop)
    padded_width = starts[-1] + s
    x = np.full((c.in_channels, s, padded_width), PAD_PIXEL)
    x[:, :, :width] = img.pixels
    windows = np.stack([x[:, :, a : a + s] for a in starts])
    outs = _apply(G, windows)
    acc = np.zeros((c.out_channels, s, padded_width))
    norm = np.zeros(padded_width)
    for k, a in enumerate(starts):
        if overlap:
            w = crossfade_weights(s, k == 0, k == len(starts) - 1)
        else:
            w = np.ones(s)
        acc[:, :, a : a + s] += outs[k] * w
        norm[a : a + s] += w
    out = np.clip(acc[:, :, :width] / norm[:width], -1.0, 1.0)
    return SpectroImage(out, img.db_floor, img.db_ceiling)


def translate(
    G: Generator, mel: Spectrogram, frontend: Frontend
) -> Spectrogram:
    """
    Translate a mel spectrogram of arbitrary frame count. The output has
    the same frame count.

    Raises:
        ContractError: the bin count differs from the generator height.
    """
    if mel.bins != G.config.image_size:
        raise ContractError(
            "bin_count_mismatch",
            f"Generator expects {G.config.image_size} bins, got {mel.bins}.",
        )
    out = translate_image(G, frontend.image_of(mel))
    return frontend.spectrogram(out)


def refine_linear(
    stages: Sequence[Generator], linear: Spectrogram, frontend: Frontend
) -> list[Spectrogram]:
    """
    Refine a linear spectrogram (typically rescaled from mel) band by
    band, through each restoration generator in turn.

    Returns:
        The linear spectrogram after each stage.
    """
    out: list[Spectrogram] = []
    current = linear
    nyquist = linear.magnitudes[:, -1]
    for G in stages:
        bands = [translate_image(G, b) for b in frontend.bands(current)]
        current = frontend.join_bands(bands, nyquist)
        out.append(current)
    return out
