"""jammin: name an Ableton Live MIDI clip, get generated MIDI back.

A daemon polls a DAW endpoint over OSC/UDP for renamed clips, asks a
pluggable LLM backend for music in a text format (ABC notation, chord
symbols, or drum tablature), parses the reply into note events, and
writes them into the clip with color-coded status.  A bit-compatible DAW
simulator and a deterministic mock backend make the whole pipeline run
offline.
"""

from .notes import (
    ClipNotes,
    NoteEvent,
    TICKS_PER_BEAT,
    TimeSig,
    TrackContext,
    beats_to_ticks,
    normalize_clip,
    quantize,
    ticks_to_beats,
)
from .textmusic import (
    FormatTag,
    MusicText,
    extract_music_block,
    parse_abc,
    parse_chords,
    parse_drumtab,
    render_abc,
)

__version__ = "0.1.0"

__all__ = [
    "ClipNotes",
    "FormatTag",
    "MusicText",
    "NoteEvent",
    "TICKS_PER_BEAT",
    "TimeSig",
    "TrackContext",
    "beats_to_ticks",
    "extract_music_block",
    "normalize_clip",
    "parse_abc",
    "parse_chords",
    "parse_drumtab",
    "quantize",
    "render_abc",
    "ticks_to_beats",
]
