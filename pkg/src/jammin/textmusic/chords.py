"""Chord symbols: ``Root[Quality][/Bass]`` tokens arranged in bars.

Voicing is fixed: chord tones live in the octave starting at C3 (MIDI 48),
a slash bass lands an octave below at C2 (MIDI 36), velocity 80.
"""

from __future__ import annotations

from typing import Optional

from ..notes import ClipNotes, NoteEvent, TimeSig, clip_from_notes

CHORD_VELOCITY = 80
ROOT_OCTAVE_BASE = 48
BASS_OCTAVE_BASE = 36

_NOTE_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

QUALITY_INTERVALS: dict[str, tuple[int, ...]] = {
    "": (0, 4, 7),
    "m": (0, 3, 7),
    "min": (0, 3, 7),
    "maj7": (0, 4, 7, 11),
    "m7": (0, 3, 7, 10),
    "7": (0, 4, 7, 10),
    "dim": (0, 3, 6),
    "dim7": (0, 3, 6, 9),
    "m7b5": (0, 3, 6, 10),
    "aug": (0, 4, 8),
    "sus2": (0, 2, 7),
    "sus4": (0, 5, 7),
    "6": (0, 4, 7, 9),
    "m6": (0, 3, 7, 9),
    "9": (0, 4, 7, 10, 14),
    "maj9": (0, 4, 7, 11, 14),
    "m9": (0, 3, 7, 10, 14),
    "add9": (0, 4, 7, 14),
}


class ChordParseError(ValueError):
    """Raised for a token outside the chord grammar."""


def _pitch_class(token: str, context: str) -> tuple[int, str]:
    if not token or token[0] not in _NOTE_PC:
        raise ChordParseError(f"unknown {context} {token[:1]!r} in chord {token!r}")
    pc = _NOTE_PC[token[0]]
    rest = token[1:]
    if rest.startswith("#"):
        pc, rest = (pc + 1) % 12, rest[1:]
    elif rest.startswith("b"):
        pc, rest = (pc - 1) % 12, rest[1:]
    return pc, rest


def chord_symbol_to_pitches(symbol: str) -> tuple[frozenset[int], Optional[int]]:
    """Resolve a chord symbol to its pitch set and optional slash-bass pitch."""
    symbol = symbol.strip()
    if "/" in symbol:
        body, bass_text = symbol.split("/", 1)
    else:
        body, bass_text = symbol, None
    root_pc, quality = _pitch_class(body, "root")
    if quality not in QUALITY_INTERVALS:
        raise ChordParseError(f"unknown chord quality {quality!r} in chord {symbol!r}")
    root = ROOT_OCTAVE_BASE + root_pc
    pitches = frozenset(root + interval for interval in QUALITY_INTERVALS[quality])
    bass = None
    if bass_text is not None:
        bass_pc, leftover = _pitch_class(bass_text, "bass note")
        if leftover:
            raise ChordParseError(f"unknown bass note {bass_text!r} in chord {symbol!r}")
        bass = BASS_OCTAVE_BASE + bass_pc
    return pitches, bass


def parse_chords(text: str, time_sig: TimeSig) -> ClipNotes:
    """Parse a bar-oriented chord progression into block chords.

    Bars are split on ``|``; whitespace-only segments are dropped, so
    progressions may span several lines.  A body with no ``|`` at all
    treats each whitespace token as its own bar.  Within a bar, n tokens
    divide it into n equal slots; ``/`` extends the previous chord one
    slot (across bar lines too), ``%`` repeats the previous bar's tokens,
    ``NC`` is a rest slot.
    """
    if "|" in text:
        bars = [seg.split() for seg in text.split("|") if seg.strip()]
    else:
        bars = [[token] for token in text.split()]
    if not bars:
        raise ChordParseError("no chord tokens found")

    bar_ticks = time_sig.bar_ticks
    notes: list[NoteEvent] = []
    # open chord awaiting possible "/" extensions: (start, end, pitches, bass)
    open_chord: Optional[tuple[int, int, frozenset[int], Optional[int]]] = None

    def close_open() -> None:
        nonlocal open_chord
        if open_chord is None:
            return
        start, end, pitches, bass = open_chord
        emitted = sorted(pitches) + ([bass] if bass is not None else [])
        for pitch in emitted:
            notes.append(NoteEvent(pitch, start, end - start, CHORD_VELOCITY))
        open_chord = None

    previous_tokens: Optional[list[str]] = None
    for bar_index, tokens in enumerate(bars):
        if "%" in tokens:
            if tokens != ["%"]:
                raise ChordParseError("% must be the only token in its bar")
            if previous_tokens is None:
                raise ChordParseError("% repeat in the first bar")
            tokens = previous_tokens
        if bar_ticks % len(tokens) != 0:
            raise ChordParseError(
                f"bar {bar_index + 1} has {len(tokens)} slots which do not divide {bar_ticks} ticks"
            )
        slot = bar_ticks // len(tokens)
        bar_start = bar_index * bar_ticks
        for slot_index, token in enumerate(tokens):
            slot_start = bar_start + slot_index * slot
            if token == "/":
                if open_chord is None:
                    raise ChordParseError("/ extension with no previous chord")
                start, _, pitches, bass = open_chord
                open_chord = (start, slot_start + slot, pitches, bass)
                continue
            close_open()
            if token == "NC":
                continue
            pitches, bass = chord_symbol_to_pitches(token)
            open_chord = (slot_start, slot_start + slot, pitches, bass)
        previous_tokens = tokens
    close_open()

    return clip_from_notes(notes, time_sig, min_end=len(bars) * bar_ticks)
