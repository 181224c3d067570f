"""ABC notation: parse a frozen subset into ClipNotes, render ClipNotes back.

Supported subset (everything else is either silently skipped or a loud
parse error -- loud failures feed the LLM retry loop):

* headers before the body, ``K:`` required and last; ``M:`` meter
  (``C`` = 4/4, ``C|`` = 2/2), ``L:`` unit note length, ``Q:`` tempo
* notes ``A-G a-g`` with octave marks ``'`` ``,``; accidentals
  ``^ ^^ _ __ =`` persisting to the end of the measure
* duration suffixes ``2``, ``/``, ``//``, ``/4``, ``3/2``
* rests ``z``; bar lines ``| || |] [| |: :|`` (all plain boundaries)
* bracket chords ``[CEG]`` (duration = first inner note's)
* ties ``-`` merging equal pitches, broken rhythm ``>`` ``<``,
  triplets ``(3``
* skipped: decorations ``~ . !...!``, quoted annotations, grace notes
  ``{...}``, slurs, ``%`` comments
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..notes import (
    ClipNotes,
    NoteEvent,
    TimeSig,
    WHOLE_NOTE_TICKS,
    clip_from_notes,
)

MELODIC_VELOCITY = 96
RENDER_UNIT_TICKS = WHOLE_NOTE_TICKS // 16  # L:1/16
RENDER_GRID = 30

_LETTER_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_PC_SHARP_SPELLING = {
    0: ("C", 0), 1: ("C", 1), 2: ("D", 0), 3: ("D", 1), 4: ("E", 0),
    5: ("F", 0), 6: ("F", 1), 7: ("G", 0), 8: ("G", 1), 9: ("A", 0),
    10: ("A", 1), 11: ("B", 0),
}
_SHARP_ORDER = "FCGDAEB"
_FLAT_ORDER = "BEADGCF"
_FIFTHS_MAJOR = {"F": -1, "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5}


class AbcParseError(ValueError):
    """Raised when ABC text falls outside the supported subset."""


class QuantizeRequiredError(ValueError):
    """Raised by render_abc when a note is off the 30-tick grid."""


@dataclass(frozen=True)
class KeySig:
    """Key signature as tonic pitch class + mode, with the accidental map
    implied by the circle of fifths (letter -> -1/0/+1)."""

    tonic_pc: int
    mode: str  # "major" | "minor"
    accidentals: tuple[tuple[str, int], ...]

    @classmethod
    def from_fields(cls, letter: str, accidental: int, mode: str) -> "KeySig":
        fifths = _FIFTHS_MAJOR[letter] + 7 * accidental
        if mode == "minor":
            fifths -= 3
        if not -7 <= fifths <= 7:
            raise AbcParseError(f"key {letter}{'#' if accidental > 0 else 'b' * (-accidental)} {mode} is off the circle of fifths")
        table: dict[str, int] = {}
        if fifths > 0:
            for l in _SHARP_ORDER[:fifths]:
                table[l] = 1
        elif fifths < 0:
            for l in _FLAT_ORDER[:-fifths]:
                table[l] = -1
        tonic_pc = (_LETTER_PC[letter] + accidental) % 12
        return cls(tonic_pc=tonic_pc, mode=mode, accidentals=tuple(sorted(table.items())))

    def accidental_for(self, letter: str) -> int:
        for l, alt in self.accidentals:
            if l == letter:
                return alt
        return 0


@dataclass(frozen=True)
class AbcHeader:
    meter: TimeSig
    unit_len: Fraction
    key: KeySig
    tempo_bpm: Optional[float] = None


_HEADER_RE = re.compile(r"^([A-Za-z]):\s*(.*?)\s*$")
_KEY_RE = re.compile(r"^([A-Ga-g])([#b]?)\s*([A-Za-z]*)$")
_TEMPO_RE = re.compile(r"^(?:(\d+)\s*/\s*(\d+)\s*=\s*)?(\d+(?:\.\d+)?)$")
_BARLINES = ("|]", "[|", "||", "|:", ":|", "|")
_MODES = {
    "": "major", "maj": "major", "major": "major",
    "m": "minor", "min": "minor", "minor": "minor",
}


def _parse_meter(value: str) -> TimeSig:
    value = value.strip()
    if value == "C":
        return TimeSig(4, 4)
    if value == "C|":
        return TimeSig(2, 2)
    m = re.match(r"^(\d+)\s*/\s*(\d+)$", value)
    if not m:
        raise AbcParseError(f"unsupported M: field: {value!r}")
    return TimeSig(int(m.group(1)), int(m.group(2)))


def _parse_unit_len(value: str) -> Fraction:
    m = re.match(r"^1\s*/\s*(\d+)$", value.strip())
    if not m or int(m.group(1)) not in (1, 2, 4, 8, 16, 32):
        raise AbcParseError(f"unsupported L: field: {value!r}")
    return Fraction(1, int(m.group(1)))


def _parse_key(value: str) -> KeySig:
    m = _KEY_RE.match(value.strip())
    if not m:
        raise AbcParseError(f"unsupported K: field: {value!r}")
    letter = m.group(1).upper()
    accidental = {"#": 1, "b": -1, "": 0}[m.group(2)]
    mode_text = m.group(3).lower()
    if mode_text not in _MODES:
        raise AbcParseError(f"unsupported key mode: {value!r}")
    return KeySig.from_fields(letter, accidental, _MODES[mode_text])


def _parse_tempo(value: str) -> float:
    m = _TEMPO_RE.match(value.strip())
    if not m:
        raise AbcParseError(f"unsupported Q: field: {value!r}")
    bpm = float(m.group(3))
    if m.group(1):
        # Q:1/8=120 means 120 eighth notes per minute; convert to quarter BPM.
        bpm *= 4 * int(m.group(1)) / int(m.group(2))
    if bpm <= 0:
        raise AbcParseError(f"non-positive tempo: {value!r}")
    return bpm


def _split_header(text: str) -> tuple[AbcHeader, str]:
    meter = TimeSig(4, 4)
    unit = Fraction(1, 8)
    tempo: Optional[float] = None
    key: Optional[KeySig] = None
    lines = text.splitlines()
    body_start = len(lines)
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        m = _HEADER_RE.match(line)
        if not m:
            raise AbcParseError(f"missing K: header before tune body (line {i + 1}: {line!r})")
        field, value = m.group(1), m.group(2)
        if field == "M":
            meter = _parse_meter(value)
        elif field == "L":
            unit = _parse_unit_len(value)
        elif field == "Q":
            tempo = _parse_tempo(value)
        elif field == "K":
            key = _parse_key(value)
            body_start = i + 1
            break
        # other header fields (X, T, C, R, ...) are ignored
    if key is None:
        raise AbcParseError("missing K: header")
    header = AbcHeader(meter=meter, unit_len=unit, key=key, tempo_bpm=tempo)
    return header, "\n".join(lines[body_start:])


@dataclass
class _Item:
    """A timed element of the tune body: note, chord, or rest."""

    kind: str  # "note" | "chord" | "rest"
    pitches: tuple[int, ...]
    duration: Fraction
    tie_after: bool = False
    broken_after: str = ""  # ">", "<" or ""


class _BodyScanner:
    def __init__(self, body: str, header: AbcHeader):
        self.text = body
        self.pos = 0
        self.header = header
        self.measure_accidentals: dict[tuple[str, int], int] = {}
        self.items: list[_Item] = []
        self.tuplet_remaining = 0
        self.cursor = Fraction(0)

    def error(self, message: str) -> AbcParseError:
        return AbcParseError(f"{message} (near byte {self.pos} of tune body)")

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def _skip_until(self, terminator: str, what: str) -> None:
        end = self.text.find(terminator, self.pos)
        if end < 0:
            raise self.error(f"unterminated {what}")
        self.pos = end + len(terminator)

    def _read_duration(self) -> Fraction:
        num = 1
        m = re.match(r"\d+", self.text[self.pos:])
        if m:
            num = int(m.group(0))
            self.pos += m.end()
        den = 1
        while self.peek() == "/":
            self.pos += 1
            m = re.match(r"\d+", self.text[self.pos:])
            if m:
                den *= int(m.group(0))
                self.pos += m.end()
                break
            den *= 2
        return Fraction(num, den)

    def _read_pitch(self) -> int:
        """One note name with optional accidentals and octave marks; applies
        and updates the per-measure accidental state."""
        explicit: Optional[int] = None
        for mark, alt in (("^^", 2), ("__", -2), ("^", 1), ("_", -1), ("=", 0)):
            if self.text.startswith(mark, self.pos):
                explicit = alt
                self.pos += len(mark)
                break
        ch = self.peek()
        if not ch or ch.upper() not in _LETTER_PC:
            raise self.error(f"expected note letter, found {ch!r}")
        letter = ch.upper()
        octave = 1 if ch.islower() else 0
        self.pos += 1
        while self.peek() in ("'", ","):
            octave += 1 if self.peek() == "'" else -1
            self.pos += 1
        if explicit is not None:
            self.measure_accidentals[(letter, octave)] = explicit
            alt = explicit
        elif (letter, octave) in self.measure_accidentals:
            alt = self.measure_accidentals[(letter, octave)]
        else:
            alt = self.header.key.accidental_for(letter)
        pitch = 60 + 12 * octave + _LETTER_PC[letter] + alt
        if not 0 <= pitch <= 127:
            raise self.error(f"pitch out of MIDI range: {pitch}")
        return pitch

    def _unit_ticks(self) -> Fraction:
        return self.header.unit_len * WHOLE_NOTE_TICKS

    def _tuplet_factor(self) -> Fraction:
        if self.tuplet_remaining > 0:
            self.tuplet_remaining -= 1
            return Fraction(2, 3)
        return Fraction(1)

    def _append(self, item: _Item) -> None:
        self.items.append(item)

    def scan(self) -> list[_Item]:
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
                continue
            if ch == "%":
                nl = text.find("\n", self.pos)
                self.pos = len(text) if nl < 0 else nl + 1
                continue
            if ch == '"':
                self.pos += 1
                self._skip_until('"', "chord annotation")
                continue
            if ch == "!":
                self.pos += 1
                self._skip_until("!", "decoration")
                continue
            if ch == "{":
                self.pos += 1
                self._skip_until("}", "grace notes")
                continue
            if ch in "~.":
                self.pos += 1
                continue
            if ch == ")":
                self.pos += 1
                continue
            if ch == "(":
                nxt = text[self.pos + 1] if self.pos + 1 < len(text) else ""
                if nxt.isdigit():
                    if nxt != "3":
                        raise self.error(f"unsupported tuplet ({nxt}")
                    self.tuplet_remaining = 3
                    self.pos += 2
                else:
                    self.pos += 1  # slur open
                continue
            barline = next((b for b in _BARLINES if text.startswith(b, self.pos)), None)
            if barline:
                self.pos += len(barline)
                self.measure_accidentals.clear()
                continue
            if ch == ":":
                raise self.error(f"unexpected character {ch!r}")
            if ch == "-":
                if not self.items or self.items[-1].kind == "rest":
                    raise self.error("tie must follow a note or chord")
                self.items[-1].tie_after = True
                self.pos += 1
                continue
            if ch in "><":
                if not self.items:
                    raise self.error(f"broken rhythm {ch!r} has no left-hand note")
                if self.items[-1].broken_after:
                    raise self.error("double broken-rhythm marks are not supported")
                self.items[-1].broken_after = ch
                self.pos += 1
                continue
            if ch == "z":
                self.pos += 1
                dur = self._read_duration() * self._unit_ticks() * self._tuplet_factor()
                self._append(_Item("rest", (), dur))
                continue
            if ch == "[":
                if self.pos + 1 < len(text) and text[self.pos + 1].isdigit():
                    raise self.error("variant endings are not supported")
                self.pos += 1
                pitches: list[int] = []
                first_dur: Optional[Fraction] = None
                while self.peek() != "]":
                    if not self.peek():
                        raise self.error("unterminated chord")
                    pitch = self._read_pitch()
                    dur = self._read_duration()
                    if first_dur is None:
                        first_dur = dur
                    pitches.append(pitch)
                self.pos += 1  # closing ]
                if not pitches or first_dur is None:
                    raise self.error("empty chord")
                dur = first_dur * self._unit_ticks() * self._tuplet_factor()
                self._append(_Item("chord", tuple(pitches), dur))
                continue
            if ch.upper() in _LETTER_PC or ch in "^_=":
                pitch = self._read_pitch()
                dur = self._read_duration() * self._unit_ticks() * self._tuplet_factor()
                self._append(_Item("note", (pitch,), dur))
                continue
            raise self.error(f"unexpected character {ch!r}")
        return self.items


def _apply_broken_rhythm(items: list[_Item]) -> None:
    for i, item in enumerate(items):
        if not item.broken_after:
            continue
        if i + 1 >= len(items):
            raise AbcParseError("broken rhythm mark has no right-hand note")
        left, right = (Fraction(3, 2), Fraction(1, 2))
        if item.broken_after == "<":
            left, right = right, left
        item.duration *= left
        items[i + 1].duration *= right


def _round_tick(value: Fraction) -> int:
    # nearest integer, ties away from zero (values are non-negative here)
    return int((2 * value.numerator + value.denominator) // (2 * value.denominator))


def _emit(items: list[_Item]) -> tuple[list[NoteEvent], Fraction]:
    notes: list[NoteEvent] = []
    cursor = Fraction(0)
    i = 0
    while i < len(items):
        item = items[i]
        if item.kind == "rest":
            if item.tie_after:
                raise AbcParseError("tie must follow a note or chord")
            cursor += item.duration
            i += 1
            continue
        duration = item.duration
        j = i
        while items[j].tie_after:
            if j + 1 >= len(items):
                raise AbcParseError("tie at end of tune")
            nxt = items[j + 1]
            if nxt.kind == "rest" or sorted(nxt.pitches) != sorted(item.pitches):
                raise AbcParseError("tie between different pitches")
            duration += nxt.duration
            j += 1
        start = _round_tick(cursor)
        end = _round_tick(cursor + duration)
        for pitch in item.pitches:
            notes.append(NoteEvent(pitch, start, max(1, end - start), MELODIC_VELOCITY))
        cursor += duration  # merged continuations occupy this span already
        i = j + 1
    return notes, cursor


def parse_abc(text: str) -> tuple[ClipNotes, AbcHeader]:
    """Parse ABC text (headers + tune body) into clip content.

    Clip length is the bar ceiling of the last note end or the final time
    cursor (so trailing written rests count), with a one-bar floor.
    """
    header, body = _split_header(text)
    scanner = _BodyScanner(body, header)
    items = scanner.scan()
    _apply_broken_rhythm(items)
    notes, cursor = _emit(items)
    clip = clip_from_notes(notes, header.meter, min_end=_round_tick(cursor))
    return clip, header


# --- rendering -------------------------------------------------------------

def _format_units(ticks: int) -> str:
    frac = Fraction(ticks, RENDER_UNIT_TICKS)
    if frac.denominator == 1:
        return "" if frac.numerator == 1 else str(frac.numerator)
    if frac.numerator == 1:
        return f"/{frac.denominator}"
    return f"{frac.numerator}/{frac.denominator}"


def _spell(pitch: int) -> tuple[str, int, int]:
    """MIDI pitch -> (letter, accidental in {0,1}, octave index rel. middle C)."""
    letter, alt = _PC_SHARP_SPELLING[pitch % 12]
    octave = pitch // 12 - 5
    return letter, alt, octave


def _note_token(pitch: int, measure_accidentals: dict[tuple[str, int], int]) -> str:
    letter, alt, octave = _spell(pitch)
    current = measure_accidentals.get((letter, octave), 0)
    prefix = ""
    if alt != current:
        prefix = {1: "^", -1: "_", 0: "="}[alt]
        measure_accidentals[(letter, octave)] = alt
    if octave >= 1:
        name = letter.lower() + "'" * (octave - 1)
    else:
        name = letter + "," * (-octave)
    return prefix + name


def render_abc(clip: ClipNotes, tempo_bpm: float) -> str:
    """Render clip content as ABC in K:C at L:1/16 with explicit accidentals.

    Requires every start/duration on the 30-tick grid.  Simultaneous notes
    with equal start and duration become bracket chords.  Clips whose notes
    partially overlap are flattened: each start group becomes one chord
    whose duration is the group's minimum, capped at the next group's start
    (single-voice ABC cannot express the overlap; round-tripping is exact
    for non-overlapping content).
    """
    for note in clip.notes:
        if note.start % RENDER_GRID or note.duration % RENDER_GRID:
            raise QuantizeRequiredError(
                f"note (pitch {note.pitch}, start {note.start}, duration {note.duration}) "
                f"is off the {RENDER_GRID}-tick grid; quantize first"
            )

    groups: list[tuple[int, int, list[int]]] = []  # (start, duration, pitches)
    for note in clip.notes:
        if groups and groups[-1][0] == note.start:
            start, dur, pitches = groups[-1]
            groups[-1] = (start, min(dur, note.duration), pitches + [note.pitch])
        else:
            groups.append((note.start, note.duration, [note.pitch]))
    for i in range(len(groups) - 1):
        start, dur, pitches = groups[i]
        groups[i] = (start, min(dur, groups[i + 1][0] - start), pitches)

    bar = clip.time_sig.bar_ticks
    tempo_text = f"{tempo_bpm:g}"
    out = [
        "X:1",
        f"M:{clip.time_sig}",
        "L:1/16",
        f"Q:1/4={tempo_text}",
        "K:C",
    ]
    body: list[str] = []
    accidentals: dict[tuple[str, int], int] = {}
    cursor = 0
    bars_on_line = 0

    def advance(position: int) -> None:
        """Fill cursor..position with rests, breaking at bar lines."""
        nonlocal cursor
        while cursor < position:
            next_bar = (cursor // bar + 1) * bar
            step = min(position, next_bar) - cursor
            body.append("z" + _format_units(step))
            cursor += step
            if cursor % bar == 0:
                close_bar()

    def close_bar() -> None:
        nonlocal bars_on_line
        body.append("|")
        accidentals.clear()
        bars_on_line += 1
        if bars_on_line % 4 == 0:
            body.append("\n")

    for start, duration, pitches in groups:
        advance(start)
        tokens = [_note_token(p, accidentals) + _format_units(duration) for p in pitches]
        body.append(tokens[0] if len(tokens) == 1 else "[" + "".join(tokens) + "]")
        cursor += duration
        if cursor % bar == 0:
            close_bar()
        elif cursor // bar > start // bar:
            # note crossed a bar boundary; close the bar late
            close_bar()

    advance(clip.length)
    text = "".join(body).rstrip("\n")
    return "\n".join(out) + "\n" + text + "\n"
