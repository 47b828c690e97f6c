"""
Evaluation reports and their aggregation.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

from spectrans.core.errors import ContractError, NumericError
from spectrans.dsp.images import SpectroImage
from spectrans.metrics.images import l1_percent, ssim
from spectrans.metrics.pitch import PitchReport, combine_pitch_reports
from spectrans.metrics.separation import BssReport
from spectrans.utils.typing import dump_typed, write_json


@dataclass(frozen=True)
class EvalReport:
    """
    Attributes:
        l1_percent: Normalised L1 distance, in percent.
        ssim: Structural similarity.
        pitch: Note and frame statistics (pitch tracking only).
        bss: Separation ratios (source separation only).
    """

    l1_percent: float
    ssim: float
    pitch: PitchReport | None = None
    bss: BssReport | None = None

    def __post_init__(self):
        values = [self.l1_percent, self.ssim]
        if self.pitch is not None:
            values += [self.pitch.precision, self.pitch.mean_frame_error]
        if self.bss is not None:
            values += [self.bss.sdr_db, self.bss.sir_db]
        if not all(math.isfinite(v) for v in values):
            raise NumericError("non_finite_metric", str(self))


def image_report(
    pred: SpectroImage,
    truth: SpectroImage,
    *,
    pitch: PitchReport | None = None,
    bss: BssReport | None = None,
) -> EvalReport:
    return EvalReport(l1_percent(pred, truth), ssim(pred, truth), pitch, bss)


def mean_report(reports: Sequence[EvalReport]) -> EvalReport:
    """
    Aggregate per-pair reports: image metrics and separation ratios are
    averaged, pitch statistics are combined.
    """
    if not reports:
        raise ContractError("no_reports", "Nothing to aggregate.")
    pitch = [r.pitch for r in reports if r.pitch is not None]
    bss = [r.bss for r in reports if r.bss is not None]
    return EvalReport(
        l1_percent=float(np.mean([r.l1_percent for r in reports])),
        ssim=float(np.mean([r.ssim for r in reports])),
        pitch=combine_pitch_reports(pitch) if pitch else None,
        bss=BssReport(
            sdr_db=float(np.mean([b.sdr_db for b in bss])),
            sir_db=float(np.mean([b.sir_db for b in bss])),
        )
        if bss
        else None,
    )


def flat_row(report: EvalReport) -> dict[str, float]:
    row: dict[str, float] = {
        "l1_percent": report.l1_percent,
        "ssim": report.ssim,
    }
    for section in (report.pitch, report.bss):
        if section is not None:
            for f in fields(section):
                row[f.name] = float(getattr(section, f.name))
    return row


def summary_table(reports: dict[str, EvalReport]) -> pd.DataFrame:
    """
    One row per named report, one column per metric.
    """
    rows = [{"name": k, **flat_row(r)} for k, r in reports.items()]
    return pd.DataFrame(rows).set_index("name")


def write_report(report: EvalReport, path: Path) -> None:
    write_json(path, dump_typed(EvalReport, report))
