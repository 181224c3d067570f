"""Choose the text music format for a generation request.

Two modes: keyword matching on the clip name (default), or asking the
model itself and falling back to keywords when its answer is unusable.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from typing import TYPE_CHECKING

from .notes import TrackContext
from .textmusic import FormatTag

if TYPE_CHECKING:
    from .llm import Backend

log = logging.getLogger("jammin.formats")


class SelectionMode(enum.Enum):
    KEYWORD = "keyword"
    MODEL_CHOICE = "model"


# Keyword lists are deliberately wider than just chord/chords; tune to taste.
DRUM_WORDS = ("drum", "drums", "beat", "groove", "percussion", "fill")
CHORD_WORDS = ("chord", "chords", "progression", "harmony", "pad", "pads")

_REPLY_FORMAT_RE = re.compile(r"abc|chord|drum", re.IGNORECASE)
_REPLY_FORMAT_MAP = {"abc": FormatTag.ABC, "chord": FormatTag.CHORD_SYMBOLS, "drum": FormatTag.DRUM_TAB}


def _has_word(text: str, words: tuple[str, ...]) -> bool:
    lowered = text.lower()
    return any(re.search(rf"\b{re.escape(word)}\b", lowered) for word in words)


def select_by_keyword(clip_name: str, track: TrackContext) -> FormatTag:
    """Pick a format from the clip name and track.

    Precedence: drum track beats drum words beats chord words beats the
    ABC default.  Word matching is case-insensitive on word boundaries.
    """
    if track.is_drum:
        return FormatTag.DRUM_TAB
    if _has_word(clip_name, DRUM_WORDS):
        return FormatTag.DRUM_TAB
    if _has_word(clip_name, CHORD_WORDS):
        return FormatTag.CHORD_SYMBOLS
    return FormatTag.ABC


def select_by_model(clip_name: str, track: TrackContext, backend: "Backend") -> FormatTag:
    """Ask the backend to choose; never fails, falls back to keywords.

    The first occurrence of an abc/chord/drum word in the reply wins.
    """
    from .llm import BackendError, build_format_choice_prompt

    try:
        reply = backend.complete(build_format_choice_prompt(clip_name, track))
    except BackendError as exc:
        log.info(json.dumps({"event": "format_fallback", "clip_name": clip_name, "reason": f"backend error: {exc}"}))
        return select_by_keyword(clip_name, track)
    match = _REPLY_FORMAT_RE.search(reply)
    if match is None:
        log.info(json.dumps({"event": "format_fallback", "clip_name": clip_name, "reason": f"unrecognized choice reply: {reply[:80]!r}"}))
        return select_by_keyword(clip_name, track)
    return _REPLY_FORMAT_MAP[match.group(0).lower()]
