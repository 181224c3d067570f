"""Text music formats: ABC notation, chord symbols, drum tablature.

Each parser turns LLM-friendly text into :class:`~jammin.notes.ClipNotes`;
:func:`render_abc` goes the other way for the edit flow.  The full
grammars are documented in docs/FORMATS.md.
"""

from ..notes import ClipNotes, TimeSig, quantize
from .abc_notation import (
    AbcHeader,
    AbcParseError,
    KeySig,
    QuantizeRequiredError,
    parse_abc,
    render_abc,
)
from .chords import ChordParseError, chord_symbol_to_pitches, parse_chords
from .drumtab import DrumTabParseError, parse_drumtab
from .extract import FormatTag, MusicText, UnparseableReplyError, extract_music_block

__all__ = [
    "AbcHeader",
    "AbcParseError",
    "ChordParseError",
    "DrumTabParseError",
    "FormatTag",
    "KeySig",
    "MusicText",
    "QuantizeRequiredError",
    "UnparseableReplyError",
    "chord_symbol_to_pitches",
    "extract_music_block",
    "parse_abc",
    "parse_chords",
    "parse_drumtab",
    "parse_music_text",
    "parser_for",
    "quantize",
    "render_abc",
]


def parse_music_text(music: MusicText, time_sig: TimeSig) -> ClipNotes:
    """Dispatch a MusicText to the parser for its format."""
    if music.format is FormatTag.ABC:
        clip, _ = parse_abc(music.body)
        return clip
    if music.format is FormatTag.CHORD_SYMBOLS:
        return parse_chords(music.body, time_sig)
    return parse_drumtab(music.body, time_sig)


def parser_for(tag: FormatTag):
    """Entry point for one format: (body, time_sig) -> ClipNotes."""

    def parse(body: str, time_sig: TimeSig) -> ClipNotes:
        return parse_music_text(MusicText(tag, body), time_sig)

    return parse
