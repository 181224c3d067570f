"""Independent ABC-to-note-list converter used as a test oracle.

Deliberately implemented with a different strategy from the package
parser (regex token stream + lookup tables keyed by spelled key names,
instead of a character scanner + circle-of-fifths arithmetic) and kept
free of any jammin imports.  Times are ticks at 480 PPQ.
"""

from __future__ import annotations

import re
from fractions import Fraction

PPQ = 480
WHOLE = 4 * PPQ

STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

# spelled key name -> signed count of sharps (negative = flats)
MAJOR_FIFTHS = {
    "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5, "F#": 6, "C#": 7,
    "F": -1, "Bb": -2, "Eb": -3, "Ab": -4, "Db": -5, "Gb": -6, "Cb": -7,
}
MINOR_FIFTHS = {
    "A": 0, "E": 1, "B": 2, "F#": 3, "C#": 4, "G#": 5, "D#": 6, "A#": 7,
    "D": -1, "G": -2, "C": -3, "F": -4, "Bb": -5, "Eb": -6, "Ab": -7,
}
SHARPS_IN_ORDER = ["F", "C", "G", "D", "A", "E", "B"]
FLATS_IN_ORDER = ["B", "E", "A", "D", "G", "C", "F"]

NOTE_BODY = r"[\^_=]*[A-Ga-g][',]*(?:\d+)?(?:/+\d*)?"
TOKEN_RE = re.compile(
    r"(?P<comment>%[^\n]*)"
    r'|(?P<annotation>"[^"]*")'
    r"|(?P<decoration>![^!\n]*!)"
    r"|(?P<grace>\{[^}]*\})"
    r"|(?P<barline>\|\]|\[\||\|\||\|:|:\||\|)"
    r"|(?P<tuplet>\(\d)"
    r"|(?P<paren>[()])"
    r"|(?P<tie>-)"
    r"|(?P<broken>[<>])"
    r"|(?P<rest>z(?:\d+)?(?:/+\d*)?)"
    r"|(?P<chord>\[(?:" + NOTE_BODY + r")+\])"
    r"|(?P<note>" + NOTE_BODY + r")"
    r"|(?P<ignored>[~.\s]+)"
)
NOTE_PARTS_RE = re.compile(r"([\^_=]*)([A-Ga-g])([',]*)((?:\d+)?(?:/+\d*)?)")


class OracleError(ValueError):
    pass


def _signature_map(key_field: str) -> dict[str, int]:
    m = re.match(r"^([A-Ga-g])([#b]?)\s*(maj(?:or)?|min(?:or)?|m)?$", key_field.strip(), re.IGNORECASE)
    if not m:
        raise OracleError(f"oracle cannot read key: {key_field!r}")
    name = m.group(1).upper() + (m.group(2) or "")
    mode = (m.group(3) or "").lower()
    minor = mode in ("m", "min", "minor")
    table = MINOR_FIFTHS if minor else MAJOR_FIFTHS
    if name not in table:
        raise OracleError(f"oracle has no entry for key {name} {'minor' if minor else 'major'}")
    count = table[name]
    if count >= 0:
        return {letter: 1 for letter in SHARPS_IN_ORDER[:count]}
    return {letter: -1 for letter in FLATS_IN_ORDER[:-count]}


def _duration(text: str, unit: Fraction) -> Fraction:
    m = re.match(r"^(\d+)?(/+)?(\d+)?$", text)
    if not m:
        raise OracleError(f"oracle cannot read duration {text!r}")
    value = Fraction(int(m.group(1) or 1))
    slashes, denom = m.group(2), m.group(3)
    if slashes:
        if denom:
            value /= Fraction(int(denom)) * 2 ** (len(slashes) - 1)
        else:
            value /= 2 ** len(slashes)
    elif denom:
        raise OracleError(f"oracle cannot read duration {text!r}")
    return value * unit * WHOLE


def _pitch(accs: str, letter: str, octave_marks: str, signature: dict[str, int], measure: dict) -> int:
    octave = 5 if letter.isupper() else 6
    octave += octave_marks.count("'") - octave_marks.count(",")
    step = letter.upper()
    if accs:
        alteration = {"^": 1, "^^": 2, "_": -1, "__": -2, "=": 0}.get(accs)
        if alteration is None:
            raise OracleError(f"oracle cannot read accidentals {accs!r}")
        measure[(step, octave)] = alteration
    alteration = measure.get((step, octave), signature.get(step, 0))
    return 12 * octave + STEP_SEMITONES[step] + alteration


def convert(text: str) -> list[tuple[int, int, int]]:
    """ABC text -> sorted [(pitch, start_ticks, duration_ticks)]."""
    meter = (4, 4)
    unit = Fraction(1, 8)
    signature: dict[str, int] = {}
    lines = text.splitlines()
    body_lines: list[str] = []
    in_body = False
    for line in lines:
        stripped = line.strip()
        if in_body:
            body_lines.append(line)
            continue
        if not stripped or stripped.startswith("%"):
            continue
        m = re.match(r"^([A-Za-z]):(.*)$", stripped)
        if not m:
            raise OracleError(f"oracle: body before K: line: {stripped!r}")
        tag, value = m.group(1), m.group(2).strip()
        if tag == "M":
            if value == "C":
                meter = (4, 4)
            elif value == "C|":
                meter = (2, 2)
            else:
                mm = re.match(r"^(\d+)/(\d+)$", value)
                if not mm:
                    raise OracleError(f"oracle cannot read meter {value!r}")
                meter = (int(mm.group(1)), int(mm.group(2)))
        elif tag == "L":
            mm = re.match(r"^1/(\d+)$", value)
            if not mm:
                raise OracleError(f"oracle cannot read unit {value!r}")
            unit = Fraction(1, int(mm.group(1)))
        elif tag == "K":
            signature = _signature_map(value)
            in_body = True
    if not in_body:
        raise OracleError("oracle: no K: line")

    body = "\n".join(body_lines)
    measure: dict = {}
    # pending items: ("note", [pitches], dur) / ("rest", [], dur)
    pending: list[list] = []
    ties: list[int] = []  # indices in pending with a tie after them
    brokens: list[tuple[int, str]] = []
    tuplet_left = 0

    pos = 0
    while pos < len(body):
        m = TOKEN_RE.match(body, pos)
        if not m:
            raise OracleError(f"oracle: stuck at {body[pos:pos + 12]!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind in ("comment", "annotation", "decoration", "grace", "ignored", "paren"):
            continue
        if kind == "barline":
            measure.clear()
            continue
        if kind == "tuplet":
            if m.group(0) != "(3":
                raise OracleError(f"oracle: unsupported tuplet {m.group(0)!r}")
            tuplet_left = 3
            continue
        if kind == "tie":
            if not pending or pending[-1][0] != "note":
                raise OracleError("oracle: tie without a note")
            ties.append(len(pending) - 1)
            continue
        if kind == "broken":
            if not pending:
                raise OracleError("oracle: broken rhythm without a note")
            brokens.append((len(pending) - 1, m.group(0)))
            continue
        factor = Fraction(1)
        if tuplet_left:
            factor = Fraction(2, 3)
            tuplet_left -= 1
        if kind == "rest":
            dur = _duration(m.group(0)[1:], unit) * factor
            pending.append(["rest", [], dur])
            continue
        if kind == "chord":
            inner = NOTE_PARTS_RE.findall(m.group(0)[1:-1])
            if not inner:
                raise OracleError("oracle: empty chord")
            pitches = [_pitch(a, l, o, signature, measure) for a, l, o, _d in inner]
            dur = _duration(inner[0][3], unit) * factor
            pending.append(["note", pitches, dur])
            continue
        if kind == "note":
            a, l, o, d = NOTE_PARTS_RE.fullmatch(m.group(0)).groups()
            pitch = _pitch(a, l, o, signature, measure)
            pending.append(["note", [pitch], _duration(d, unit) * factor])
            continue
        raise OracleError(f"oracle: unhandled token {m.group(0)!r}")

    for index, mark in brokens:
        if index + 1 >= len(pending):
            raise OracleError("oracle: dangling broken rhythm")
        first, second = (Fraction(3, 2), Fraction(1, 2)) if mark == ">" else (Fraction(1, 2), Fraction(3, 2))
        pending[index][2] *= first
        pending[index + 1][2] *= second

    tie_set = set(ties)
    events: list[tuple[int, int, int]] = []
    clock = Fraction(0)
    i = 0
    while i < len(pending):
        kind, pitches, dur = pending[i]
        if kind == "rest":
            if i in tie_set:
                raise OracleError("oracle: tie on a rest")
            clock += dur
            i += 1
            continue
        total = dur
        j = i
        while j in tie_set:
            if j + 1 >= len(pending) or pending[j + 1][0] != "note":
                raise OracleError("oracle: dangling tie")
            if sorted(pending[j + 1][1]) != sorted(pitches):
                raise OracleError("oracle: tie between different pitches")
            total += pending[j + 1][2]
            j += 1
        start = round(clock)
        end = round(clock + total)
        for p in pitches:
            events.append((p, int(start), max(1, int(end) - int(start))))
        clock += total
        i = j + 1
    return sorted(events)
