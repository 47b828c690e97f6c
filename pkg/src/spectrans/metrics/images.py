"""
Image similarity metrics on normalised spectrogram images.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from spectrans.core.errors import ContractError
from spectrans.dsp.images import SpectroImage

PIXEL_RANGE = 2.0


def _same_shape(a: SpectroImage, b: SpectroImage) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise ContractError(
            "shape_mismatch",
            f"Images differ in shape: {a.pixels.shape} vs {b.pixels.shape}.",
        )


def l1_percent(a: SpectroImage, b: SpectroImage) -> float:
    """
    Mean absolute pixel difference as a percentage of the pixel range.
    """
    _same_shape(a, b)
    return float(np.mean(np.abs(a.pixels - b.pixels)) / PIXEL_RANGE * 100)


def ssim(
    a: SpectroImage,
    b: SpectroImage,
    window: int = 8,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """
    Structural similarity: the mean over all positions of a square
    window (and over channels) of the local product of luminance,
    contrast and structure terms, with dynamic range 2.
    """
    _same_shape(a, b)
    if window < 1 or window > min(a.height, a.width):
        raise ContractError(
            "invalid_window", f"Window {window} for {a.height}x{a.width}."
        )
    c1 = (k1 * PIXEL_RANGE) ** 2
    c2 = (k2 * PIXEL_RANGE) ** 2
    shape = (window, window)
    wa = sliding_window_view(a.pixels, shape, axis=(1, 2))
    wb = sliding_window_view(b.pixels, shape, axis=(1, 2))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = wa.var(axis=(-2, -1))
    var_b = wb.var(axis=(-2, -1))
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
