"""
Source separation quality: signal-to-distortion and
source-to-interference ratios from orthogonal projections.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from spectrans.core.errors import ContractError, DegenerateInputError
from spectrans.dsp.audio import Waveform

DB_SENTINEL = 300.0
SATURATION_DB = 200.0


@dataclass(frozen=True)
class BssReport:
    sdr_db: float
    sir_db: float


def _db(num: float, den: float) -> float:
    """
    Energy ratio in dB. Ratios beyond `±SATURATION_DB`, which only arise
    from rounding errors around an exact zero, are reported as
    `±DB_SENTINEL`.
    """
    if num <= 0 and den <= 0:
        return 0.0
    if den <= 0:
        return DB_SENTINEL
    if num <= 0:
        return -DB_SENTINEL
    db = 10 * float(np.log10(num / den))
    if abs(db) > SATURATION_DB:
        return DB_SENTINEL if db > 0 else -DB_SENTINEL
    return db


def _project(basis: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Orthogonal projection of `x` onto the span of the rows of `basis`.
    """
    coeffs, *_ = np.linalg.lstsq(basis.T, x, rcond=None)
    return basis.T @ coeffs


def bss_decomposition(
    estimate: Waveform, target: Waveform, interferences: Sequence[Waveform]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Split an estimate into its projection on the target, an
    interference error in the span of all sources, and the remaining
    artifacts.

    Raises:
        ContractError: the signals differ in length.
        DegenerateInputError: the target is identically zero.
    """
    n = len(target)
    for w in (estimate, *interferences):
        if len(w) != n:
            raise ContractError(
                "length_mismatch", f"{len(w)} samples vs {n} in the target."
            )
    t = target.samples
    energy = float(t @ t)
    if energy == 0:
        raise DegenerateInputError("zero_target", "Target is silent.")
    e = estimate.samples
    s_target = (float(e @ t) / energy) * t
    sources = np.stack([t, *(w.samples for w in interferences)])
    p_all = _project(sources, e)
    return s_target, p_all - s_target, e - p_all


def bss_ratios(
    estimate: Waveform, target: Waveform, interferences: Sequence[Waveform]
) -> BssReport:
    s_target, e_interf, e_artif = bss_decomposition(
        estimate, target, interferences
    )
    s = float(s_target @ s_target)
    err = e_interf + e_artif
    return BssReport(
        sdr_db=_db(s, float(err @ err)),
        sir_db=_db(s, float(e_interf @ e_interf)),
    )
