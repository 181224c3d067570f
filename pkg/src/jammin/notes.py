"""Canonical in-memory note model.

All musical time in this package is integer ticks at 480 PPQ (one tick =
1/480 quarter note).  Floats appear only at the wire boundary, where the
DAW speaks beats; :func:`beats_to_ticks` / :func:`ticks_to_beats` convert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

TICKS_PER_BEAT = 480
WHOLE_NOTE_TICKS = 4 * TICKS_PER_BEAT

Tick = int

DRUM_NAME_HINTS = ("drum", "drums", "kit", "perc", "808", "beat")


def beats_to_ticks(beats: float) -> Tick:
    """Convert float beats to integer ticks, rounding ties away from zero."""
    if beats < 0:
        raise ValueError(f"negative beat value: {beats}")
    return math.floor(beats * TICKS_PER_BEAT + 0.5)


def ticks_to_beats(ticks: Tick) -> float:
    return ticks / TICKS_PER_BEAT


@dataclass(frozen=True)
class NoteEvent:
    """One note: MIDI pitch, start/duration in ticks, velocity 1-127."""

    pitch: int
    start: Tick
    duration: Tick
    velocity: int

    def sort_key(self) -> tuple[Tick, int, Tick, int]:
        return (self.start, self.pitch, self.duration, self.velocity)

    @property
    def end(self) -> Tick:
        return self.start + self.duration

    def validate(self) -> None:
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch out of range: {self.pitch}")
        if self.start < 0:
            raise ValueError(f"negative start: {self.start}")
        if self.duration < 1:
            raise ValueError(f"non-positive duration: {self.duration}")
        if not 1 <= self.velocity <= 127:
            raise ValueError(f"velocity out of range: {self.velocity}")


@dataclass(frozen=True)
class TimeSig:
    numerator: int
    denominator: int

    VALID_DENOMINATORS = (1, 2, 4, 8, 16, 32)

    def __post_init__(self) -> None:
        if self.numerator < 1:
            raise ValueError(f"time signature numerator must be positive: {self.numerator}")
        if self.denominator not in self.VALID_DENOMINATORS:
            raise ValueError(f"time signature denominator must be a power of two <= 32: {self.denominator}")

    @property
    def bar_ticks(self) -> Tick:
        # 4/denominator quarter notes per beat unit; exact since 32 | 1920.
        return self.numerator * WHOLE_NOTE_TICKS // self.denominator

    def __str__(self) -> str:
        return f"{self.numerator}/{self.denominator}"


FOUR_FOUR = TimeSig(4, 4)


@dataclass(frozen=True)
class ClipNotes:
    """Immutable clip content: sorted notes, loop length, meter.

    Invariants (checked at construction): notes sorted by
    (start, pitch, duration, velocity), every note in range, every start
    strictly inside the clip, length a positive whole number of bars.
    """

    notes: tuple[NoteEvent, ...]
    length: Tick
    time_sig: TimeSig = FOUR_FOUR

    def __post_init__(self) -> None:
        object.__setattr__(self, "notes", tuple(self.notes))
        bar = self.time_sig.bar_ticks
        if self.length <= 0 or self.length % bar != 0:
            raise ValueError(f"clip length {self.length} is not a positive multiple of {bar}")
        prev: NoteEvent | None = None
        for note in self.notes:
            note.validate()
            if note.start >= self.length:
                raise ValueError(f"note start {note.start} beyond clip length {self.length}")
            if prev is not None and prev.sort_key() > note.sort_key():
                raise ValueError("notes are not sorted")
            prev = note

    @property
    def bars(self) -> int:
        return self.length // self.time_sig.bar_ticks

    def pitch_start_duration(self) -> list[tuple[int, Tick, Tick]]:
        """The (pitch, start, duration) multiset, for velocity-free comparisons."""
        return sorted((n.pitch, n.start, n.duration) for n in self.notes)


@dataclass(frozen=True)
class TrackContext:
    """Per-track context forwarded into prompts.

    ``is_drum`` is derived from the track name and cannot be set directly.
    """

    track_name: str
    tempo_bpm: float
    time_sig: TimeSig = FOUR_FOUR
    is_drum: bool = field(init=False, default=False)

    def __post_init__(self) -> None:
        if self.tempo_bpm <= 0:
            raise ValueError(f"tempo must be positive: {self.tempo_bpm}")
        object.__setattr__(self, "is_drum", infer_is_drum(self.track_name))


def infer_is_drum(track_name: str) -> bool:
    lowered = track_name.lower()
    return any(hint in lowered for hint in DRUM_NAME_HINTS)


def _bar_ceil(ticks: Tick, bar: Tick) -> Tick:
    bars = max(1, -(-ticks // bar))
    return bars * bar


def clip_from_notes(
    notes: Iterable[NoteEvent],
    time_sig: TimeSig,
    min_end: Tick = 0,
) -> ClipNotes:
    """Build a ClipNotes from valid notes; length = bar ceiling, 1-bar floor.

    ``min_end`` lets callers stretch the clip past the last note (trailing
    rests a parser saw, or a pre-existing clip length).
    """
    ordered = sorted(notes, key=NoteEvent.sort_key)
    last_end = max((n.end for n in ordered), default=0)
    length = _bar_ceil(max(last_end, min_end), time_sig.bar_ticks)
    return ClipNotes(notes=tuple(ordered), length=length, time_sig=time_sig)


def normalize_clip(notes: Sequence[NoteEvent], time_sig: TimeSig) -> ClipNotes:
    """Sort notes, clamp pitch/velocity into MIDI range, round length up to bars.

    Pitches and velocities arriving from the wire are clamped rather than
    rejected; durations must already be >= 1 tick.
    """
    clamped = []
    for note in notes:
        if note.duration < 1:
            raise ValueError(f"non-positive duration: {note.duration}")
        if note.start < 0:
            raise ValueError(f"negative start: {note.start}")
        clamped.append(
            replace(
                note,
                pitch=min(127, max(0, note.pitch)),
                velocity=min(127, max(1, note.velocity)),
            )
        )
    return clip_from_notes(clamped, time_sig)


def quantize(clip: ClipNotes, grid: Tick) -> ClipNotes:
    """Snap starts to the nearest grid point and durations to the nearest
    positive multiple of the grid (ties round up, minimum one grid unit).

    The grid must divide 480 or be a multiple of 30 so results stay
    expressible in the ABC renderer's sixteenth-based units.
    """
    if grid < 1 or (TICKS_PER_BEAT % grid != 0 and grid % 30 != 0):
        raise ValueError(f"unsupported quantize grid: {grid}")

    def nearest(value: Tick) -> Tick:
        return (2 * value + grid) // (2 * grid) * grid

    moved = [
        replace(n, start=nearest(n.start), duration=max(grid, nearest(n.duration)))
        for n in clip.notes
    ]
    moved.sort(key=NoteEvent.sort_key)
    last_end = max((n.end for n in moved), default=0)
    length = max(clip.length, _bar_ceil(last_end, clip.time_sig.bar_ticks))
    return ClipNotes(notes=tuple(moved), length=length, time_sig=clip.time_sig)
