"""Prompt building and text completion against a pluggable backend.

The HTTP backend speaks the common chat-completions JSON shape against a
configurable base URL, so any compatible server works.  The mock backend
answers from fixture files and keeps the whole pipeline offline and
deterministic.  Prompt wording lives in versioned template files under
``jammin/prompts/``, not in string literals.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Protocol

import requests

from .notes import ClipNotes, TimeSig, TrackContext, clip_from_notes
from .textmusic import FormatTag, extract_music_block, parser_for

PROMPT_VERSION = "v1"
MAX_RETRIES = 2  # reparse retries; total backend calls <= 1 + MAX_RETRIES

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown chat role: {self.role!r}")
        if not self.content.strip():
            raise ValueError("empty chat message content")


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "https://api.openai.com"
    model_name: str = "gpt-4-turbo"
    api_key_env_var: str = "JAMMIN_API_KEY"
    temperature: float = 0.7
    max_tokens: int = 1024
    request_timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if self.request_timeout_s <= 0:
            raise ValueError("request timeout must be positive")


@dataclass(frozen=True)
class GenRequest:
    """One generation or edit job; ``existing`` is set only for edits."""

    clip_name: str
    track: TrackContext
    format: FormatTag
    bars_hint: Optional[int] = None
    existing: Optional[str] = None

    @property
    def is_edit(self) -> bool:
        return self.existing is not None


class BackendError(Exception):
    """Base for all completion backend failures."""


class BackendAuthError(BackendError):
    pass


class BackendRateLimitError(BackendError):
    retriable = True


class BackendTimeoutError(BackendError):
    pass


class BackendTransportError(BackendError):
    pass


class MockFixtureMissingError(BackendTransportError):
    pass


class ExhaustedRetriesError(Exception):
    """All parse attempts failed; carries the last parse error."""

    def __init__(self, attempts: int, last_error: Exception):
        super().__init__(f"no parseable reply after {attempts} attempts: {last_error}")
        self.attempts = attempts
        self.last_error = last_error


class Backend(Protocol):
    def complete(self, messages: list[ChatMessage]) -> str: ...


# --- prompt templates --------------------------------------------------------

def _template(name: str, version: str = PROMPT_VERSION) -> str:
    return (
        resources.files("jammin.prompts")
        .joinpath(version)
        .joinpath(f"{name}.txt")
        .read_text(encoding="utf-8")
    )


_SYSTEM_TEMPLATES = {
    FormatTag.ABC: "system_abc",
    FormatTag.CHORD_SYMBOLS: "system_chords",
    FormatTag.DRUM_TAB: "system_drumtab",
}


def _context_fields(clip_name: str, track: TrackContext, fmt: FormatTag) -> dict[str, str]:
    return {
        "clip_name": clip_name,
        "track_name": track.track_name,
        "tempo_bpm": f"{track.tempo_bpm:g}",
        "time_sig": str(track.time_sig),
        "format_id": fmt.value,
    }


def build_generate_prompt(req: GenRequest) -> list[ChatMessage]:
    """System + user messages for a fresh clip."""
    if req.is_edit:
        raise ValueError("generate prompt requested for an edit job")
    fields = _context_fields(req.clip_name, req.track, req.format)
    fields["bars_line"] = f"Length: {req.bars_hint} bars\n" if req.bars_hint else ""
    return [
        ChatMessage("system", _template(_SYSTEM_TEMPLATES[req.format])),
        ChatMessage("user", _template("user_generate").format(**fields)),
    ]


def build_edit_prompt(req: GenRequest) -> list[ChatMessage]:
    """System + user messages for altering an existing clip (always ABC)."""
    if not req.is_edit:
        raise ValueError("edit prompt requested without existing content")
    fields = _context_fields(req.clip_name, req.track, req.format)
    fields["existing"] = (req.existing or "").strip()
    return [
        ChatMessage("system", _template(_SYSTEM_TEMPLATES[req.format])),
        ChatMessage("user", _template("user_edit").format(**fields)),
    ]


def build_format_choice_prompt(clip_name: str, track: TrackContext) -> list[ChatMessage]:
    fields = _context_fields(clip_name, track, FormatTag.ABC)
    return [
        ChatMessage("system", _template("choice_system")),
        ChatMessage("user", _template("choice_user").format(**fields)),
    ]


# --- backends ----------------------------------------------------------------

class HttpBackend:
    """Chat-completions client: POST {base_url}/v1/chat/completions."""

    def __init__(self, config: BackendConfig, session: Optional[requests.Session] = None):
        self.config = config
        self._session = session or requests.Session()

    def complete(self, messages: list[ChatMessage]) -> str:
        if not messages:
            raise ValueError("no messages to send")
        cfg = self.config
        api_key = os.environ.get(cfg.api_key_env_var, "")
        if not api_key:
            raise BackendAuthError(f"environment variable {cfg.api_key_env_var} is not set")
        url = cfg.base_url.rstrip("/") + "/v1/chat/completions"
        body = {
            "model": cfg.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        try:
            response = self._session.post(
                url,
                json=body,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=cfg.request_timeout_s,
            )
        except requests.Timeout as exc:
            raise BackendTimeoutError(f"no reply within {cfg.request_timeout_s}s") from exc
        except requests.RequestException as exc:
            raise BackendTransportError(str(exc)) from exc
        if response.status_code in (401, 403):
            raise BackendAuthError(f"backend rejected credentials (HTTP {response.status_code})")
        if response.status_code == 429:
            raise BackendRateLimitError("backend rate limit hit (HTTP 429)")
        if response.status_code >= 400:
            raise BackendTransportError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendTransportError(f"malformed completion response: {exc}") from exc


_CLIP_NAME_LINE = re.compile(r"^Clip name:\s*(.+)$", re.MULTILINE)
_FORMAT_LINE = re.compile(r"^Respond in format:\s*(abc|chords|drumtab)\s*$", re.MULTILINE)
_CHOICE_LINE = re.compile(r"^Task: choose format$", re.MULTILINE)


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "untitled"


def canonical_prompt_key(messages: list[ChatMessage]) -> str:
    canon = "\n---\n".join(f"{m.role}\n{m.content.strip()}" for m in messages)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


class MockBackend:
    """Deterministic offline backend answering from fixture files.

    Lookup order inside ``fixture_dir``: <format>/<slugified clip name>.txt,
    then <format>/<16-hex sha256 prefix of the canonical prompt>.txt.
    Format-choice prompts use the ``choice/`` directory.
    """

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)
        self.calls = 0

    def complete(self, messages: list[ChatMessage]) -> str:
        self.calls += 1
        user_text = "\n".join(m.content for m in messages if m.role == "user")
        if _CHOICE_LINE.search(user_text):
            subdir = "choice"
        else:
            fmt = _FORMAT_LINE.search(user_text)
            subdir = fmt.group(1) if fmt else "abc"
        name = _CLIP_NAME_LINE.search(user_text)
        candidates = []
        if name:
            candidates.append(self.fixture_dir / subdir / f"{slugify(name.group(1))}.txt")
        candidates.append(self.fixture_dir / subdir / f"{canonical_prompt_key(messages)}.txt")
        for path in candidates:
            if path.is_file():
                return path.read_text(encoding="utf-8")
        tried = ", ".join(str(p) for p in candidates)
        raise MockFixtureMissingError(f"no mock fixture found (tried: {tried})")


# --- retry loop ----------------------------------------------------------------

def generate_with_retry(
    req: GenRequest,
    backend: Backend,
    parser: Optional[Callable[[str, TimeSig], ClipNotes]] = None,
    on_attempt: Optional[Callable[[int, Optional[Exception]], None]] = None,
) -> ClipNotes:
    """Prompt, parse, and retry with error feedback; at most 3 backend calls.

    Replies that extract to a different format than requested count as
    parse failures.  Backend errors pass straight through.
    """
    parse = parser or parser_for(req.format)
    messages = build_edit_prompt(req) if req.is_edit else build_generate_prompt(req)
    retry_template = _template("retry_user")
    last_error: Optional[Exception] = None
    for attempt in range(1, MAX_RETRIES + 2):
        reply = backend.complete(messages)
        try:
            music = extract_music_block(reply)
            if music.format is not req.format:
                raise ValueError(
                    f"reply classified as {music.format.value}, expected {req.format.value}"
                )
            clip = parse(music.body, req.track.time_sig)
            # re-normalize defensively but keep the parser's bar count
            clip = clip_from_notes(clip.notes, clip.time_sig, min_end=clip.length)
            if on_attempt:
                on_attempt(attempt, None)
            return clip
        except ValueError as exc:
            last_error = exc
            if on_attempt:
                on_attempt(attempt, exc)
            messages = messages + [
                ChatMessage("assistant", reply if reply.strip() else "(empty reply)"),
                ChatMessage("user", retry_template.format(error=exc, format_id=req.format.value)),
            ]
    assert last_error is not None
    raise ExhaustedRetriesError(MAX_RETRIES + 1, last_error)
