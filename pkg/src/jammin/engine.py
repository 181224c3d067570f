"""Session engine: detect renamed clips, run generate/edit jobs, drive
clip colors, persist which names were already handled.

One owner thread polls and applies all state changes; jobs execute on a
small worker pool and communicate results back over a queue, so the clip
record map is never mutated concurrently.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from queue import Empty, Queue
from typing import Optional

from .formats import SelectionMode, select_by_keyword, select_by_model
from .llm import Backend, GenRequest, generate_with_retry
from .notes import TrackContext, quantize, ticks_to_beats
from .protocol import (
    DONE_COLOR,
    ERROR_COLOR,
    GENERATING_COLOR,
    ClipAddress,
    LiveClient,
    ProtocolError,
    ProtocolTimeoutError,
)
from .textmusic import FormatTag, render_abc

log = logging.getLogger("jammin.engine")

SCAN_TIMEOUT_S = 3.0
QUANTIZE_GRID = 30
_BARS_HINT_RE = re.compile(r"(\d+)\s*bars?\b", re.IGNORECASE)


def extract_bars_hint(clip_name: str) -> Optional[int]:
    match = _BARS_HINT_RE.search(clip_name)
    if match:
        bars = int(match.group(1))
        return bars if bars > 0 else None
    return None


class ClipStatus(enum.Enum):
    IDLE = "idle"
    GENERATING = "generating"
    DONE = "done"
    ERROR = "error"


@dataclass
class ClipRecord:
    key: ClipAddress
    last_seen_name: str = ""
    has_notes: bool = False
    status: ClipStatus = ClipStatus.IDLE
    last_processed_name: str = ""
    pending_name: Optional[str] = None
    active_name: Optional[str] = None  # name the in-flight job is generating for


@dataclass(frozen=True)
class JobTrigger:
    key: ClipAddress
    name: str
    has_notes: bool


@dataclass(frozen=True)
class JobResult:
    key: ClipAddress
    name: str
    ok: bool
    stage: str
    error: str = ""
    format: str = ""
    notes_written: int = 0


@dataclass(frozen=True)
class Colors:
    generating: int = GENERATING_COLOR
    done: int = DONE_COLOR
    error: int = ERROR_COLOR


class SessionState:
    """Clip records plus the persisted processed-name snapshot."""

    def __init__(self, snapshot_path: Optional[str | Path] = None, poll_interval_s: float = 1.0):
        self.records: dict[ClipAddress, ClipRecord] = {}
        self.snapshot_path = Path(snapshot_path) if snapshot_path else None
        self.poll_interval_s = poll_interval_s

    def record(self, key: ClipAddress) -> ClipRecord:
        if key not in self.records:
            self.records[key] = ClipRecord(key=key)
        return self.records[key]

    def persist(self) -> None:
        if self.snapshot_path is None:
            return
        snapshot = {
            "version": 1,
            "processed": [
                {"track": r.key.track, "clip": r.key.clip, "name": r.last_processed_name}
                for r in sorted(self.records.values(), key=lambda r: (r.key.track, r.key.clip))
                if r.last_processed_name
            ],
        }
        tmp = self.snapshot_path.with_suffix(self.snapshot_path.suffix + ".tmp")
        tmp.write_text(json.dumps(snapshot, indent=2), encoding="utf-8")
        os.replace(tmp, self.snapshot_path)

    def restore(self) -> int:
        if self.snapshot_path is None or not self.snapshot_path.exists():
            return 0
        try:
            data = json.loads(self.snapshot_path.read_text(encoding="utf-8"))
            entries = data["processed"]
            loaded = 0
            for entry in entries:
                key = ClipAddress(int(entry["track"]), int(entry["clip"]))
                self.record(key).last_processed_name = str(entry["name"])
                loaded += 1
            return loaded
        except (ValueError, KeyError, TypeError) as exc:
            log.warning("unreadable snapshot %s (%s); starting fresh", self.snapshot_path, exc)
            self.records.clear()
            return 0


class Engine:
    """Wires protocol client, LLM backend, and session state together."""

    def __init__(
        self,
        client: LiveClient,
        backend: Backend,
        state: Optional[SessionState] = None,
        colors: Colors = Colors(),
        selection_mode: SelectionMode = SelectionMode.KEYWORD,
        max_workers: int = 2,
    ):
        self.client = client
        self.backend = backend
        self.state = state or SessionState()
        self.colors = colors
        self.selection_mode = selection_mode
        self.max_workers = max_workers
        self._results: "Queue[JobResult]" = Queue()
        self._stop = threading.Event()
        self._in_flight = 0

    # -- polling ---------------------------------------------------------

    def poll_once(self) -> list[JobTrigger]:
        """Scan the DAW and admit jobs for renamed clips.

        A trigger fires iff the clip's name is non-empty, differs from the
        last processed name, and no job is in flight for that clip; firing
        marks the record Generating, so polling is idempotent.  While a
        job runs, later renames coalesce into pending_name (latest wins).
        """
        try:
            infos = self.client.scan(timeout_s=SCAN_TIMEOUT_S)
        except ProtocolTimeoutError as exc:
            self._log_event("poll", skipped=True, reason=str(exc))
            return []
        except ProtocolError as exc:
            self._log_event("poll", skipped=True, reason=str(exc))
            return []
        triggers: list[JobTrigger] = []
        for info in infos:
            rec = self.state.record(info.key)
            rec.last_seen_name = info.name
            rec.has_notes = info.has_notes
            if rec.status is ClipStatus.GENERATING:
                if info.name and info.name != rec.active_name:
                    rec.pending_name = info.name
                elif info.name == rec.active_name:
                    rec.pending_name = None
                continue
            if info.name and info.name != rec.last_processed_name:
                rec.status = ClipStatus.GENERATING
                rec.active_name = info.name
                rec.pending_name = None
                triggers.append(JobTrigger(info.key, info.name, info.has_notes))
        self._log_event("poll", clips=len(infos), triggers=len(triggers))
        for trigger in triggers:
            self._log_event(
                "trigger",
                key=str(trigger.key),
                name=trigger.name,
                edit=trigger.has_notes,
            )
        return triggers

    # -- job execution -------------------------------------------------------

    def execute_job(self, trigger: JobTrigger) -> JobResult:
        """Protocol + LLM work for one trigger; no session-state mutation.

        Clip notes are cleared only after a successful parse, so a failed
        edit leaves the original content untouched.
        """
        key = trigger.key
        stage = "set_color_generating"
        try:
            self._log_event("stage", key=str(key), stage=stage)
            self.client.set_color(key, self.colors.generating)

            stage = "fetch_context"
            self._log_event("stage", key=str(key), stage=stage)
            tempo = self.client.get_tempo()
            time_sig = self.client.get_time_sig()
            track_name = self.client.get_track_name(key.track)
            track = TrackContext(track_name, tempo, time_sig)
            bars_hint = extract_bars_hint(trigger.name)

            if trigger.has_notes:
                stage = "read_notes"
                self._log_event("stage", key=str(key), stage=stage)
                existing = self.client.read_clip(key, time_sig)
                rendered = render_abc(quantize(existing, QUANTIZE_GRID), tempo)
                req = GenRequest(
                    clip_name=trigger.name,
                    track=track,
                    format=FormatTag.ABC,
                    bars_hint=bars_hint,
                    existing=rendered,
                )
            else:
                stage = "select_format"
                self._log_event("stage", key=str(key), stage=stage)
                if self.selection_mode is SelectionMode.MODEL_CHOICE:
                    fmt = select_by_model(trigger.name, track, self.backend)
                else:
                    fmt = select_by_keyword(trigger.name, track)
                req = GenRequest(
                    clip_name=trigger.name, track=track, format=fmt, bars_hint=bars_hint
                )

            stage = "generate"
            self._log_event("stage", key=str(key), stage=stage, format=req.format.value)
            clip = generate_with_retry(req, self.backend)

            stage = "write_notes"
            self._log_event("stage", key=str(key), stage=stage, notes=len(clip.notes))
            self.client.write_clip(key, clip, clear_first=trigger.has_notes)

            stage = "set_color_done"
            self.client.set_color(key, self.colors.done)
            return JobResult(
                key=key,
                name=trigger.name,
                ok=True,
                stage="done",
                format=req.format.value,
                notes_written=len(clip.notes),
            )
        except Exception as exc:  # every failure maps to a stage-tagged result
            try:
                self.client.set_color(key, self.colors.error)
            except Exception:
                log.debug("could not set error color on %s", key)
            return JobResult(key=key, name=trigger.name, ok=False, stage=stage, error=str(exc))

    def apply_result(self, result: JobResult) -> None:
        """Owner-thread state transition for a finished job.

        last_processed_name updates even on failure so a broken backend
        cannot cause a hot retry loop; the user retriggers by renaming.
        """
        rec = self.state.record(result.key)
        rec.status = ClipStatus.DONE if result.ok else ClipStatus.ERROR
        rec.last_processed_name = result.name
        rec.active_name = None
        rec.pending_name = None
        self.state.persist()
        self._log_event(
            "result",
            key=str(result.key),
            name=result.name,
            ok=result.ok,
            stage=result.stage,
            error=result.error,
            format=result.format,
            notes=result.notes_written,
        )

    def run_job(self, trigger: JobTrigger) -> JobResult:
        """Execute and apply synchronously (single-threaded path)."""
        result = self.execute_job(trigger)
        self.apply_result(result)
        return result

    # -- daemon loop -----------------------------------------------------------

    def run_forever(self) -> None:
        """Poll/dispatch loop; returns after stop() once workers drain."""
        self.state.restore()
        with ThreadPoolExecutor(max_workers=self.max_workers, thread_name_prefix="jammin-job") as pool:
            next_poll = 0.0
            while not self._stop.is_set():
                self._drain_results()
                now = time.monotonic()
                if now >= next_poll:
                    for trigger in self.poll_once():
                        self._in_flight += 1
                        pool.submit(self._worker, trigger)
                    next_poll = now + self.state.poll_interval_s
                self._stop.wait(0.05)
            deadline = time.monotonic() + 5.0
            while self._in_flight > 0 and time.monotonic() < deadline:
                self._drain_results(block_s=0.1)
        self._drain_results()
        self.state.persist()

    def _worker(self, trigger: JobTrigger) -> None:
        self._results.put(self.execute_job(trigger))

    def _drain_results(self, block_s: float = 0.0) -> None:
        while True:
            try:
                result = self._results.get(timeout=block_s) if block_s else self._results.get_nowait()
            except Empty:
                return
            self._in_flight -= 1
            self.apply_result(result)

    def stop(self) -> None:
        self._stop.set()

    @staticmethod
    def _log_event(event: str, **fields) -> None:
        log.info(json.dumps({"event": event, **fields}, sort_keys=True))
