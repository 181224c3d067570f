"""Pull a usable block of text music out of a raw LLM reply.

Preference order: an explicitly tagged fenced block, then any fenced
block whose contents classify, then a classification of the whole reply.
When classifying untagged text we keep only the lines that look like the
detected format, so surrounding prose does not poison the parser.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .chords import QUALITY_INTERVALS, _NOTE_PC
from .drumtab import HIT_VELOCITIES, LABEL_PITCHES, REST_CHARS


class FormatTag(enum.Enum):
    ABC = "abc"
    CHORD_SYMBOLS = "chords"
    DRUM_TAB = "drumtab"


@dataclass(frozen=True)
class MusicText:
    format: FormatTag
    body: str

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise ValueError("music text body is empty")


class UnparseableReplyError(ValueError):
    """The reply contains nothing recognizable as music text."""


_FENCE_RE = re.compile(r"^```[ \t]*([A-Za-z0-9_-]*)[ \t]*\n(.*?)^```[ \t]*$", re.MULTILINE | re.DOTALL)
_TAG_FORMATS = {tag.value: tag for tag in FormatTag}

_ABC_HEADER_RE = re.compile(r"^(?:X|K):", re.MULTILINE)
_ABC_ANY_HEADER_RE = re.compile(r"^[XMLQK]:")
_CHORD_TOKEN_RE = re.compile(
    r"^[A-G][#b]?(%s)(/[A-G][#b]?)?$"
    % "|".join(sorted((re.escape(q) for q in QUALITY_INTERVALS), key=len, reverse=True) or [""])
)


def _is_drumtab_line(line: str) -> bool:
    if "|" not in line:
        return False
    head, *segments = line.split("|")
    if head.strip().upper() not in LABEL_PITCHES:
        return False
    segments = [s.strip() for s in segments if s.strip()]
    if not segments:
        return False
    allowed = set(HIT_VELOCITIES) | set(REST_CHARS)
    return all(all(ch in allowed for ch in seg) for seg in segments)


def _is_chord_line(line: str) -> bool:
    tokens = [t for t in line.replace("|", " ").split() if t]
    if not tokens:
        return False
    saw_chord = False
    for token in tokens:
        if token in ("%", "NC"):
            continue
        if token == "/":
            continue
        if _CHORD_TOKEN_RE.match(token):
            saw_chord = True
            continue
        return False
    return saw_chord


def _classify(text: str) -> MusicText | None:
    lines = text.splitlines()
    for i, line in enumerate(lines):
        if _ABC_HEADER_RE.match(line.strip()):
            # take the tune from its first header line to the next blank gap
            start = i
            while start > 0 and _ABC_ANY_HEADER_RE.match(lines[start - 1].strip()):
                start -= 1
            body_lines: list[str] = []
            seen_key = False
            for l in lines[start:]:
                if not l.strip() and seen_key:
                    break
                if l.strip().startswith("K:"):
                    seen_key = True
                body_lines.append(l)
            return MusicText(FormatTag.ABC, "\n".join(body_lines).strip())
    tab_lines = [l for l in lines if _is_drumtab_line(l.strip())]
    if tab_lines:
        return MusicText(FormatTag.DRUM_TAB, "\n".join(l.strip() for l in tab_lines))
    chord_lines = [l.strip() for l in lines if l.strip() and _is_chord_line(l.strip())]
    if chord_lines:
        return MusicText(FormatTag.CHORD_SYMBOLS, "\n".join(chord_lines))
    return None


def extract_music_block(llm_reply: str) -> MusicText:
    """Find the music payload in an LLM reply.

    Raises UnparseableReplyError when no fenced block or line pattern
    classifies; the caller's retry loop reports that back to the model.
    """
    for match in _FENCE_RE.finditer(llm_reply):
        tag, interior = match.group(1).lower(), match.group(2).strip()
        if not interior:
            continue
        if tag in _TAG_FORMATS:
            return MusicText(_TAG_FORMATS[tag], interior)
        classified = _classify(interior)
        if classified is not None:
            return classified
    classified = _classify(llm_reply)
    if classified is not None:
        return classified
    raise UnparseableReplyError("reply contains no recognizable music text")
