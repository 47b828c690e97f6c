"""
Monophonic note scores and their plain text format.

A score file holds one note per line, written as `onset_ms duration_ms
midi_pitch [velocity]`. Blank lines are ignored and `#` starts a comment
that runs until the end of the line. For example:

```
# A4 then B4
0 500 69
500 500 71 0.8
```
"""

# pyright: basic

from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import parsy as ps

from spectrans.core.errors import ConfigError, ParseError, RangeError

MIN_PITCH = 24
MAX_PITCH = 108


@dataclass(frozen=True)
class NoteEvent:
    """
    A note of a monophonic voice.

    Attributes:
        onset_ms: Onset time, in milliseconds.
        duration_ms: Duration, in milliseconds (positive).
        midi_pitch: MIDI note number in [24, 108] (69 is A4 at 440 Hz).
        velocity: Relative loudness in (0, 1].
    """

    onset_ms: float
    duration_ms: float
    midi_pitch: int
    velocity: float = 1.0

    @property
    def offset_ms(self) -> float:
        return self.onset_ms + self.duration_ms

    @property
    def frequency_hz(self) -> float:
        return midi_to_hz(self.midi_pitch)


def midi_to_hz(pitch: float) -> float:
    return 440.0 * 2.0 ** ((pitch - 69) / 12)


def hz_to_midi(f: float) -> float:
    return 69 + 12 * float(np.log2(f / 440.0))


#####
##### Grammar Definition with Parsy
#####


_s = ps.string
_spaces = ps.regex(r"[ \t]+")
_spopt = ps.regex(r"[ \t]*")
_number = ps.regex(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?").map(float)
_integer = ps.regex(r"[-+]?\d+").map(int)
_comment = _s("#") >> ps.regex(r".*")

_event = ps.seq(
    _spopt >> _number,
    _spaces >> _number,
    _spaces >> _integer,
    (_spaces >> _number).optional(1.0),
) << _spopt << _comment.optional()

_blank = _spopt << _comment.optional()


def _check_event(
    onset: float, dur: float, pitch: int, vel: float, line: int
) -> None:
    if not MIN_PITCH <= pitch <= MAX_PITCH:
        raise RangeError(
            "pitch_out_of_range",
            f"line {line}: pitch {pitch} not in [{MIN_PITCH}, {MAX_PITCH}]",
        )
    if onset < 0 or dur <= 0 or not 0 < vel <= 1:
        raise RangeError(
            "invalid_note",
            f"line {line}: need onset >= 0, duration > 0 and velocity in "
            + f"(0, 1] (got {onset}, {dur}, {vel}).",
        )


def parse_score(text: str) -> list[NoteEvent]:
    """
    Parse a score, sort its events by onset and truncate every event that
    overlaps the next one so that it ends at the next onset. Events left
    with no duration after truncation are dropped.

    Raises:
        ParseError: a line does not follow the score format.
        RangeError: a pitch lies outside [24, 108], or a duration,
            onset or velocity is invalid.
    """
    events: list[NoteEvent] = []
    for i, line in enumerate(text.splitlines(), start=1):
        try:
            _blank.parse(line)
            continue
        except ps.ParseError:
            pass
        try:
            onset, dur, pitch, vel = _event.parse(line)
        except ps.ParseError as e:
            raise ParseError(f"{line!r}: {e}", line=i)
        _check_event(onset, dur, pitch, vel, i)
        events.append(NoteEvent(onset, dur, pitch, vel))
    return make_monophonic(events)


def make_monophonic(events: Sequence[NoteEvent]) -> list[NoteEvent]:
    ordered = sorted(events, key=lambda e: e.onset_ms)
    out: list[NoteEvent] = []
    for i, e in enumerate(ordered):
        if i + 1 < len(ordered):
            next_onset = ordered[i + 1].onset_ms
            if e.offset_ms > next_onset:
                e = replace(e, duration_ms=next_onset - e.onset_ms)
        if e.duration_ms > 0:
            out.append(e)
    return out


def format_score(events: Sequence[NoteEvent]) -> str:
    """
    Print events in the score format, so that `parse_score` gives them
    back exactly (floats are printed with `repr`).
    """
    lines = [
        f"{e.onset_ms!r} {e.duration_ms!r} {e.midi_pitch} {e.velocity!r}"
        for e in events
    ]
    return "".join(line + "\n" for line in lines)


#####
##### Random scores
#####


def random_score(
    seed: int,
    n_notes: int,
    pitch_lo: int = 48,
    pitch_hi: int = 84,
    tempo_range: tuple[float, float] = (90.0, 150.0),
    rest_probability: float = 0.2,
) -> list[NoteEvent]:
    """
    Draw a monophonic score with pitches uniform in `[pitch_lo,
    pitch_hi]`.

    A tempo is drawn from `tempo_range` (in beats per minute). Each note
    lasts half a beat, one beat or two beats and may be followed by a
    half-beat rest. Times are whole milliseconds, so that scores are
    printed and parsed back exactly.
    """
    if pitch_lo > pitch_hi:
        raise ConfigError(
            "invalid_pitch_range",
            f"pitch_lo {pitch_lo} > pitch_hi {pitch_hi}",
        )
    if pitch_lo < MIN_PITCH or pitch_hi > MAX_PITCH:
        raise RangeError(
            "pitch_out_of_range", f"[{pitch_lo}, {pitch_hi}] not in range"
        )
    rng = np.random.default_rng(seed)
    bpm = rng.uniform(*tempo_range)
    beat_ms = max(2, int(round(60000.0 / bpm)))
    events: list[NoteEvent] = []
    onset = 0
    for _ in range(n_notes):
        beats = rng.choice([0.5, 1.0, 2.0])
        dur = max(1, int(round(float(beats) * beat_ms)))
        pitch = int(rng.integers(pitch_lo, pitch_hi + 1))
        vel = round(float(rng.uniform(0.5, 1.0)), 3)
        events.append(NoteEvent(float(onset), float(dur), pitch, vel))
        rest = beat_ms // 2 if rng.random() < rest_probability else 0
        onset += dur + rest
    return events


def score_duration_ms(events: Sequence[NoteEvent]) -> float:
    return max((e.offset_ms for e in events), default=0.0)
