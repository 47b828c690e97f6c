import pytest

from spectrans.core.errors import ConfigError, ParseError, RangeError
from spectrans.datagen.scores import (
    NoteEvent,
    format_score,
    hz_to_midi,
    midi_to_hz,
    parse_score,
    random_score,
    score_duration_ms,
)


def test_pitch_conversions():
    assert midi_to_hz(69) == 440.0
    assert midi_to_hz(81) == pytest.approx(880.0)
    assert hz_to_midi(220.0) == pytest.approx(57.0)


def test_parse_score():
    text = """
    # A4 then B4
    0 500 69
    500 500 71 0.8  # softer

    1000 250.5 72
    """
    notes = parse_score(text)
    assert notes == [
        NoteEvent(0.0, 500.0, 69, 1.0),
        NoteEvent(500.0, 500.0, 71, 0.8),
        NoteEvent(1000.0, 250.5, 72, 1.0),
    ]
    assert score_duration_ms(notes) == 1250.5
    assert notes[1].frequency_hz == pytest.approx(493.88, abs=0.01)


def test_overlaps_are_truncated():
    notes = parse_score("250 500 62\n0 500 60\n")
    assert [(e.onset_ms, e.duration_ms) for e in notes] == [
        (0.0, 250.0),
        (250.0, 500.0),
    ]


def test_empty_notes_are_dropped():
    notes = parse_score("0 500 60\n0 300 62\n")
    assert notes == [NoteEvent(0.0, 300.0, 62)]


@pytest.mark.parametrize(
    "text,line",
    [("0 500", 1), ("0 500 60\nfoo bar baz", 2), ("0 500 60.5", 1)],
)
def test_parse_errors(text: str, line: int):
    with pytest.raises(ParseError) as e:
        parse_score(text)
    assert e.value.line == line


@pytest.mark.parametrize(
    "text", ["0 500 20", "0 500 109", "0 0 60", "-5 100 60", "0 100 60 1.5"]
)
def test_range_errors(text: str):
    with pytest.raises(RangeError):
        parse_score(text)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_random_score(seed: int):
    notes = random_score(seed, 10, 60, 72)
    assert len(notes) == 10
    assert notes == random_score(seed, 10, 60, 72)
    assert all(60 <= e.midi_pitch <= 72 for e in notes)
    assert all(a.offset_ms <= b.onset_ms for a, b in zip(notes, notes[1:]))
    assert parse_score(format_score(notes)) == notes


def test_random_score_ranges():
    with pytest.raises(ConfigError):
        random_score(0, 4, 70, 60)
    with pytest.raises(RangeError):
        random_score(0, 4, 10, 60)
