"""
Pitch decoding from translated images and note-level statistics.

A pitch track is a sequence holding, for each frame, the mel bin of the
pitch or `UNVOICED`.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from spectrans.core.errors import ConfigError, ContractError
from spectrans.datagen.scores import (
    MAX_PITCH,
    MIN_PITCH,
    NoteEvent,
    hz_to_midi,
    midi_to_hz,
)
from spectrans.dsp.images import SpectroImage
from spectrans.dsp.mel import MelFilterbank

UNVOICED = -1
VOICING_THRESHOLD = -0.9
DEFAULT_MIN_FRAMES = 3
NOTE_OVERLAP = 0.5


@dataclass(frozen=True)
class BinNote:
    """
    A note found in a pitch track, spanning frames `[start, end)`.
    """

    start: int
    end: int
    bin: int

    @property
    def frames(self) -> int:
        return self.end - self.start


def decode_pitch(
    img: SpectroImage, threshold: float = VOICING_THRESHOLD
) -> np.ndarray:
    """
    For each frame, the row of the brightest pixel (lowest row on ties),
    or `UNVOICED` if that pixel is not above `threshold`.
    """
    if img.channels != 1:
        raise ContractError(
            "not_single_channel", f"Image has {img.channels} channels."
        )
    px = img.pixels[0]
    bins = np.argmax(px, axis=0)
    peak = px[bins, np.arange(px.shape[1])]
    return np.where(peak > threshold, bins, UNVOICED).astype(np.int64)


def _note_bin(bins: Sequence[int]) -> float:
    return float(np.median(bins))


def extract_notes(
    bins: np.ndarray | Sequence[int], min_frames: int = DEFAULT_MIN_FRAMES
) -> list[BinNote]:
    """
    Group a pitch track into notes: maximal runs of voiced frames whose
    bins stay within one bin of the run's median. Runs shorter than
    `min_frames` are dropped.
    """
    if min_frames < 1:
        raise ConfigError("invalid_min_frames", str(min_frames))
    track = [int(b) for b in bins]
    notes: list[BinNote] = []
    run: list[int] = []
    start = 0

    def close(end: int) -> None:
        if len(run) >= min_frames:
            med = _note_bin(run)
            notes.append(BinNote(start, end, int(np.floor(med + 0.5))))

    for t, b in enumerate(track):
        if b == UNVOICED:
            close(t)
            run = []
            continue
        if run:
            candidate = run + [b]
            med = _note_bin(candidate)
            if all(abs(x - med) <= 1 for x in candidate):
                run.append(b)
                continue
            close(t)
        run = [b]
        start = t
    close(len(track))
    return notes


def frame_errors(pred: np.ndarray, truth: np.ndarray) -> int:
    """
    Number of frames whose predicted bin is at least two bins away from
    the true one, or whose voicing differs.
    """
    if len(pred) != len(truth):
        raise ContractError(
            "length_mismatch", f"{len(pred)} vs {len(truth)} frames."
        )
    pv, tv = pred != UNVOICED, truth != UNVOICED
    far = np.abs(pred - truth) >= 2
    return int(np.sum((pv != tv) | (pv & tv & far)))


def match_notes(pred: Sequence[BinNote], truth: Sequence[BinNote]) -> int:
    """
    Number of true notes matched by a predicted note within one bin
    that covers at least half of their frames. Each predicted note
    matches at most one true note.
    """
    used: set[int] = set()
    correct = 0
    for tn in truth:
        for k, pn in enumerate(pred):
            if k in used or abs(pn.bin - tn.bin) > 1:
                continue
            overlap = min(pn.end, tn.end) - max(pn.start, tn.start)
            if overlap >= NOTE_OVERLAP * tn.frames:
                used.add(k)
                correct += 1
                break
    return correct


@dataclass(frozen=True)
class PitchReport:
    """
    Attributes:
        correct_notes: True notes found in the prediction.
        total_truth_notes: Number of true notes.
        total_pred_notes: Number of predicted notes.
        precision: Percentage of predicted notes that are correct.
        mean_frame_error: Frame errors per spectrogram.
    """

    correct_notes: int
    total_truth_notes: int
    total_pred_notes: int
    precision: float
    mean_frame_error: float


def _precision(correct: int, predicted: int) -> float:
    return 100.0 * correct / predicted if predicted > 0 else 0.0


def pitch_stats(
    pred: np.ndarray,
    truth: np.ndarray,
    min_frames: int = DEFAULT_MIN_FRAMES,
) -> PitchReport:
    """
    Compare a predicted pitch track with the true one, for a single
    spectrogram.
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    errors = frame_errors(pred, truth)
    pn = extract_notes(pred, min_frames)
    tn = extract_notes(truth, min_frames)
    correct = match_notes(pn, tn)
    return PitchReport(
        correct_notes=correct,
        total_truth_notes=len(tn),
        total_pred_notes=len(pn),
        precision=_precision(correct, len(pn)),
        mean_frame_error=float(errors),
    )


def combine_pitch_reports(reports: Sequence[PitchReport]) -> PitchReport:
    """
    Sum note tallies and average frame errors over spectrograms.
    """
    if not reports:
        raise ContractError("no_reports", "Nothing to combine.")
    correct = sum(r.correct_notes for r in reports)
    predicted = sum(r.total_pred_notes for r in reports)
    return PitchReport(
        correct_notes=correct,
        total_truth_notes=sum(r.total_truth_notes for r in reports),
        total_pred_notes=predicted,
        precision=_precision(correct, predicted),
        mean_frame_error=float(
            np.mean([r.mean_frame_error for r in reports])
        ),
    )


#####
##### Conversion to scores
#####


def bin_to_midi(fb: MelFilterbank, b: int) -> int:
    """
    The MIDI pitch closest to the centre frequency of a mel bin.
    """
    f = max(float(fb.centers_hz[b]), 1e-3)
    return int(np.clip(round(hz_to_midi(f)), MIN_PITCH, MAX_PITCH))


def midi_to_bin(fb: MelFilterbank, pitch: float) -> int:
    """
    The mel bin whose centre frequency is closest to a MIDI pitch, on a
    logarithmic scale.
    """
    f = midi_to_hz(pitch)
    centers = np.maximum(fb.centers_hz, 1e-3)
    return int(np.argmin(np.abs(np.log(centers) - np.log(f))))


def notes_to_events(
    notes: Sequence[BinNote], fb: MelFilterbank, frame_ms: float
) -> list[NoteEvent]:
    """
    Convert notes found in a pitch track into score events, with times
    in whole milliseconds.
    """
    return [
        NoteEvent(
            onset_ms=float(round(n.start * frame_ms)),
            duration_ms=float(max(1, round(n.frames * frame_ms))),
            midi_pitch=bin_to_midi(fb, n.bin),
        )
        for n in notes
    ]


def score_track(
    notes: Sequence[NoteEvent], fb: MelFilterbank, frame_ms: float, frames: int
) -> np.ndarray:
    """
    The pitch track of a score: the mel bin of the note sounding at the
    centre of each frame (frame `t` is centred on time `t * frame_ms`).
    """
    track = np.full(frames, UNVOICED, dtype=np.int64)
    centers = np.arange(frames) * frame_ms
    for n in notes:
        on = (centers >= n.onset_ms) & (centers < n.offset_ms)
        track[on] = midi_to_bin(fb, n.midi_pitch)
    return track
