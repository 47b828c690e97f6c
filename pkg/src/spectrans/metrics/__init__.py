"""
Evaluation metrics: image similarity, pitch statistics and separation
ratios.
"""

# ruff: noqa: F401
# pyright: reportUnusedImport=false

from spectrans.metrics.images import l1_percent, ssim
from spectrans.metrics.pitch import (
    UNVOICED,
    BinNote,
    PitchReport,
    combine_pitch_reports,
    decode_pitch,
    extract_notes,
    frame_errors,
    match_notes,
    notes_to_events,
    pitch_stats,
    score_track,
)
from spectrans.metrics.reports import (
    EvalReport,
    image_report,
    mean_report,
    summary_table,
    write_report,
)
from spectrans.metrics.separation import BssReport, bss_ratios
