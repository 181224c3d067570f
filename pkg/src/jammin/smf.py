"""Standard MIDI File writer (format 0, division 480).

Output is a single track holding one tempo meta event, note-on/note-off
pairs, and end-of-track; at equal ticks note-offs sort before note-ons so
repeated pitches never overlap.
"""

from __future__ import annotations

import struct
from pathlib import Path

from .notes import TICKS_PER_BEAT, ClipNotes

_NOTE_ON = 0x90
_NOTE_OFF = 0x80


def encode_varint(value: int) -> bytes:
    """MIDI variable-length quantity: 7 bits per byte, high bit = continue."""
    if value < 0 or value > 0x0FFFFFFF:
        raise ValueError(f"varint out of range: {value}")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def write_smf(clip: ClipNotes, tempo_bpm: float) -> bytes:
    """Serialize clip content to SMF format 0 bytes."""
    if tempo_bpm <= 0:
        raise ValueError(f"tempo must be positive: {tempo_bpm}")
    events: list[tuple[int, int, bytes]] = []  # (tick, order, event bytes)
    for note in clip.notes:
        events.append((note.start, 1, bytes([_NOTE_ON, note.pitch, note.velocity])))
        events.append((note.end, 0, bytes([_NOTE_OFF, note.pitch, 0])))
    events.sort(key=lambda e: (e[0], e[1]))

    track = bytearray()
    microseconds_per_quarter = round(60_000_000 / tempo_bpm)
    track += b"\x00\xff\x51\x03" + struct.pack(">I", microseconds_per_quarter)[1:]
    cursor = 0
    for tick, _, event in events:
        track += encode_varint(tick - cursor)
        track += event
        cursor = tick
    track += b"\x00\xff\x2f\x00"

    header = b"MThd" + struct.pack(">IHHH", 6, 0, 1, TICKS_PER_BEAT)
    return header + b"MTrk" + struct.pack(">I", len(track)) + bytes(track)


def write_smf_file(clip: ClipNotes, tempo_bpm: float, path: str | Path) -> None:
    Path(path).write_bytes(write_smf(clip, tempo_bpm))
