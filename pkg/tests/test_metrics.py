import json
from pathlib import Path

import numpy as np
import pytest

from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
    NumericError,
)
from spectrans.datagen.scores import NoteEvent, hz_to_midi
from spectrans.dsp.audio import Waveform
from spectrans.dsp.images import SpectroImage
from spectrans.dsp.mel import mel_filterbank
from spectrans.metrics import (
    UNVOICED,
    BinNote,
    BssReport,
    EvalReport,
    PitchReport,
    bss_ratios,
    combine_pitch_reports,
    decode_pitch,
    extract_notes,
    frame_errors,
    image_report,
    l1_percent,
    match_notes,
    mean_report,
    notes_to_events,
    pitch_stats,
    score_track,
    ssim,
    summary_table,
    write_report,
)
from spectrans.metrics.pitch import midi_to_bin

U = UNVOICED


def _random_image(
    seed: int, shape: tuple[int, ...] = (1, 8, 10)
) -> SpectroImage:
    rng = np.random.default_rng(seed)
    return SpectroImage(rng.uniform(-1, 1, shape))


def _ssim_oracle(a: np.ndarray, b: np.ndarray, window: int) -> float:
    c1, c2 = (0.01 * 2) ** 2, (0.03 * 2) ** 2
    values: list[float] = []
    for ch in range(a.shape[0]):
        for i in range(a.shape[1] - window + 1):
            for j in range(a.shape[2] - window + 1):
                x = a[ch, i : i + window, j : j + window].ravel()
                y = b[ch, i : i + window, j : j + window].ravel()
                mx, my = x.mean(), y.mean()
                cov = np.mean((x - mx) * (y - my))
                num = (2 * mx * my + c1) * (2 * cov + c2)
                den = (mx**2 + my**2 + c1) * (x.var() + y.var() + c2)
                values.append(num / den)
    return float(np.mean(values))


#####
##### Images
#####


def test_l1_percent():
    lo = SpectroImage(-np.ones((1, 4, 4)))
    hi = SpectroImage(np.ones((1, 4, 4)))
    assert l1_percent(lo, hi) == 100.0
    assert l1_percent(lo, lo) == 0.0
    mid = SpectroImage(np.zeros((1, 4, 4)))
    assert l1_percent(lo, mid) == 50.0


@pytest.mark.parametrize("window", [1, 4, 8])
def test_ssim_matches_direct_computation(window: int):
    a = _random_image(0, (2, 8, 10))
    b = _random_image(1, (2, 8, 10))
    expected = _ssim_oracle(a.pixels, b.pixels, window)
    assert ssim(a, b, window) == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_ssim_identity():
    a = _random_image(2)
    assert ssim(a, a) == pytest.approx(1.0)
    assert ssim(a, _random_image(3)) < 0.5


def test_image_metric_contracts():
    a = _random_image(0)
    with pytest.raises(ContractError):
        l1_percent(a, _random_image(0, (1, 8, 9)))
    with pytest.raises(ContractError):
        ssim(a, a, window=9)


#####
##### Pitch
#####


def test_decode_pitch():
    px = -np.ones((1, 8, 5))
    px[0, 3, 0] = 0.5
    px[0, 2, 1] = px[0, 5, 1] = 0.2
    px[0, 1, 3] = -0.95
    px[0, 7, 4] = 1.0
    assert decode_pitch(SpectroImage(px)).tolist() == [3, 2, U, U, 7]
    with pytest.raises(ContractError):
        decode_pitch(SpectroImage(np.zeros((2, 4, 4))))


@pytest.mark.parametrize(
    "track,expected",
    [
        (
            [5, 5, 5, U, 7, 7, 8, 7, U, 2, 2],
            [BinNote(0, 3, 5), BinNote(4, 8, 7)],
        ),
        ([3, 3, 3, 6, 6, 6], [BinNote(0, 3, 3), BinNote(3, 6, 6)]),
        ([4, 5, 5, 4], [BinNote(0, 4, 5)]),
        ([U, U, 2, 2], []),
        ([], []),
    ],
)
def test_extract_notes(track: list[int], expected: list[BinNote]):
    assert extract_notes(track) == expected


def test_extract_notes_min_frames():
    assert extract_notes([2, 2], min_frames=2) == [BinNote(0, 2, 2)]
    with pytest.raises(ConfigError):
        extract_notes([2], min_frames=0)


def test_frame_errors():
    pred = np.array([1, 2, 5, U, 3])
    truth = np.array([1, 3, 3, 3, U])
    assert frame_errors(pred, truth) == 3
    with pytest.raises(ContractError):
        frame_errors(pred, truth[:4])


@pytest.mark.parametrize(
    "pred,correct",
    [
        ([BinNote(4, 10, 6)], 1),
        ([BinNote(5, 10, 4)], 1),
        ([BinNote(6, 10, 5)], 0),
        ([BinNote(0, 10, 7)], 0),
        ([], 0),
    ],
)
def test_match_notes(pred: list[BinNote], correct: int):
    assert match_notes(pred, [BinNote(0, 10, 5)]) == correct


def test_predicted_notes_match_once():
    truth = [BinNote(0, 4, 5), BinNote(0, 4, 5)]
    assert match_notes([BinNote(0, 4, 5)], truth) == 1


def test_pitch_stats():
    truth = np.array([5, 5, 5, 5, U, 9, 9, 9])
    perfect = pitch_stats(truth, truth)
    assert perfect == PitchReport(2, 2, 2, 100.0, 0.0)
    pred = np.array([5, 5, 5, 5, U, U, 2, 2])
    report = pitch_stats(pred, truth)
    assert report.correct_notes == 1
    assert report.total_pred_notes == 1
    assert report.mean_frame_error == 3.0


def test_combine_pitch_reports():
    a = PitchReport(1, 2, 4, 25.0, 2.0)
    b = PitchReport(3, 3, 4, 75.0, 4.0)
    combined = combine_pitch_reports([a, b])
    assert combined == PitchReport(4, 5, 8, 50.0, 3.0)
    with pytest.raises(ContractError):
        combine_pitch_reports([])


def test_score_tracks():
    fb = mel_filterbank(64, 1024, 16000)
    notes = [NoteEvent(0.0, 100.0, 69), NoteEvent(150.0, 50.0, 72)]
    track = score_track(notes, fb, 25.0, 10)
    a4, c5 = midi_to_bin(fb, 69), midi_to_bin(fb, 72)
    assert track.tolist() == [a4, a4, a4, a4, U, U, c5, c5, U, U]


def test_notes_to_events():
    fb = mel_filterbank(64, 1024, 16000)
    b = midi_to_bin(fb, 69)
    (event,) = notes_to_events([BinNote(2, 6, b)], fb, 25.0)
    assert event.onset_ms == 50.0 and event.duration_ms == 100.0
    center = hz_to_midi(float(fb.centers_hz[b]))
    assert abs(center - event.midi_pitch) <= 0.5


#####
##### Separation
#####

N = 400


def _tone(cycles: int, amp: float) -> np.ndarray:
    return amp * np.sin(2 * np.pi * cycles * np.arange(N) / N)


def test_bss_ratios_of_known_mixture():
    target = Waveform(_tone(5, 0.4), 16000)
    interf = Waveform(_tone(9, 0.4), 16000)
    artifact = _tone(13, 0.4)
    est = Waveform(target.samples + 0.5 * interf.samples, 16000)
    r = bss_ratios(est, target, [interf])
    assert r.sir_db == pytest.approx(10 * np.log10(4), abs=1e-6)
    assert r.sdr_db == pytest.approx(10 * np.log10(4), abs=1e-6)
    noisy = Waveform(est.samples + 0.25 * artifact, 16000)
    r = bss_ratios(noisy, target, [interf])
    assert r.sir_db == pytest.approx(10 * np.log10(4), abs=1e-6)
    assert r.sdr_db == pytest.approx(10 * np.log10(3.2), abs=1e-6)


def test_bss_ratios_are_scale_invariant():
    rng = np.random.default_rng(0)
    target = Waveform(rng.uniform(-0.5, 0.5, N), 16000)
    interf = Waveform(rng.uniform(-0.5, 0.5, N), 16000)
    est = rng.uniform(-0.3, 0.3, N) + target.samples
    a = bss_ratios(Waveform(est, 16000), target, [interf])
    b = bss_ratios(Waveform(0.5 * est, 16000), target, [interf])
    assert a.sdr_db == pytest.approx(b.sdr_db)
    assert a.sir_db == pytest.approx(b.sir_db)


def test_perfect_estimate_saturates():
    target = Waveform(_tone(5, 0.4), 16000)
    interf = Waveform(_tone(9, 0.4), 16000)
    r = bss_ratios(target, target, [interf])
    assert r.sdr_db == 300.0 and r.sir_db == 300.0


def test_bss_contracts():
    target = Waveform(_tone(5, 0.4), 16000)
    with pytest.raises(DegenerateInputError):
        bss_ratios(target, Waveform(np.zeros(N), 16000), [])
    with pytest.raises(ContractError):
        bss_ratios(Waveform(np.zeros(N - 1), 16000), target, [])


#####
##### Reports
#####


def test_mean_report():
    a = _random_image(0)
    r1 = image_report(a, a, pitch=PitchReport(1, 1, 2, 50.0, 2.0))
    r2 = EvalReport(
        10.0,
        0.5,
        pitch=PitchReport(1, 2, 2, 50.0, 4.0),
        bss=BssReport(6.0, 12.0),
    )
    mean = mean_report([r1, r2])
    assert mean.l1_percent == pytest.approx(5.0)
    assert mean.ssim == pytest.approx(0.75)
    assert mean.pitch == PitchReport(2, 3, 4, 50.0, 3.0)
    assert mean.bss == BssReport(6.0, 12.0)
    with pytest.raises(ContractError):
        mean_report([])


def test_summary_table_and_file(tmp_path: Path):
    reports = {
        "gan": EvalReport(4.0, 0.8, bss=BssReport(5.0, 9.0)),
        "baseline": EvalReport(6.0, 0.7, bss=BssReport(3.0, 7.0)),
    }
    table = summary_table(reports)
    assert list(table.index) == ["gan", "baseline"]
    assert list(table.columns) == ["l1_percent", "ssim", "sdr_db", "sir_db"]
    assert table.loc["baseline", "sdr_db"] == 3.0
    write_report(reports["gan"], tmp_path / "report.json")
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["bss"] == {"sdr_db": 5.0, "sir_db": 9.0}
    assert data["pitch"] is None


def test_non_finite_report():
    with pytest.raises(NumericError):
        EvalReport(float("nan"), 0.5)
