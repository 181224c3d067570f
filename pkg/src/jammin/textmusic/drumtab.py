"""Drum tablature: one line per instrument, one character per step.

Line form ``LABEL|segment|segment|...|``; segment i of every line covers
bar i, and its character count sets that bar's step resolution.  Labels
map to General MIDI percussion notes, pattern characters carry velocity.
"""

from __future__ import annotations

from ..notes import ClipNotes, NoteEvent, TimeSig, clip_from_notes

LABEL_PITCHES: dict[str, int] = {
    "BD": 36, "K": 36,
    "SD": 38, "S": 38,
    "HH": 42, "CH": 42,
    "HP": 44,
    "OH": 46,
    "RS": 37,
    "CL": 39,
    "LT": 45,
    "MT": 47,
    "HT": 50,
    "CR": 49, "C": 49,
    "RD": 51, "R": 51,
    "CB": 56,
}

HIT_VELOCITIES: dict[str, int] = {"x": 90, "X": 120, "o": 100, "O": 127, "g": 40}
REST_CHARS = ("-", ".")


class DrumTabParseError(ValueError):
    """Raised for labels, characters, or grids outside the tab format."""


def parse_drumtab(text: str, time_sig: TimeSig) -> ClipNotes:
    """Parse tab lines into percussion notes on the GM drum map.

    Lines may cover different bar counts (missing segments are silent),
    but every line present in bar i must agree on its character count,
    and that count must divide the bar's ticks evenly.
    """
    rows: list[tuple[str, int, list[str]]] = []  # (label, pitch, segments)
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if "|" not in line:
            raise DrumTabParseError(f"line {line_number} has no '|' segments: {line!r}")
        head, *segments = line.split("|")
        label = head.strip().upper()
        if label not in LABEL_PITCHES:
            raise DrumTabParseError(f"unknown drum label {head.strip()!r} on line {line_number}")
        if segments and segments[-1].strip() == "":
            segments = segments[:-1]
        segments = [seg.strip() for seg in segments]
        if not segments:
            raise DrumTabParseError(f"line {line_number} has no pattern segments")
        rows.append((label, LABEL_PITCHES[label], segments))
    if not rows:
        raise DrumTabParseError("no tab lines found")

    bar_ticks = time_sig.bar_ticks
    bar_count = max(len(segments) for _, _, segments in rows)
    notes: list[NoteEvent] = []
    for bar in range(bar_count):
        width = None
        for label, _, segments in rows:
            if bar >= len(segments):
                continue
            if width is None:
                width = len(segments[bar])
            elif len(segments[bar]) != width:
                raise DrumTabParseError(
                    f"bar {bar + 1}: line {label!r} has {len(segments[bar])} steps, others have {width}"
                )
        assert width is not None
        if width == 0 or bar_ticks % width != 0:
            raise DrumTabParseError(
                f"bar {bar + 1}: {width} steps do not divide {bar_ticks} ticks"
            )
        step = bar_ticks // width
        for label, pitch, segments in rows:
            if bar >= len(segments):
                continue
            for j, ch in enumerate(segments[bar]):
                if ch in REST_CHARS:
                    continue
                velocity = HIT_VELOCITIES.get(ch)
                if velocity is None:
                    raise DrumTabParseError(
                        f"bar {bar + 1}: unknown pattern character {ch!r} in line {label!r}"
                    )
                notes.append(NoteEvent(pitch, bar * bar_ticks + j * step, step, velocity))

    return clip_from_notes(notes, time_sig, min_end=bar_count * bar_ticks)
