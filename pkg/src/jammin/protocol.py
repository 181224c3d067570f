"""The /jammin/* OSC address space spoken between daemon and DAW endpoint.

Both the bundled simulator and the in-DAW remote script implement the
server side of this contract; PROTOCOL.md documents every address and
argument layout, and tests/golden/ holds byte fixtures both sides must
match.  All wire times are float beats; ticks exist only in memory.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .notes import ClipNotes, NoteEvent, TimeSig, beats_to_ticks, normalize_clip, ticks_to_beats
from .osc import OscMessage, UdpTransport

log = logging.getLogger("jammin.protocol")

DAW_PORT = 19000  # DAW endpoint listens here
DAEMON_PORT = 19001  # daemon listens here

GET_TEMPO = "/jammin/song/get/tempo"
TEMPO = "/jammin/song/tempo"
GET_TIME_SIG = "/jammin/song/get/time_sig"
TIME_SIG = "/jammin/song/time_sig"
GET_TRACK_NAME = "/jammin/track/get/name"
TRACK_NAME = "/jammin/track/name"
SCAN = "/jammin/scan"
CLIP_INFO = "/jammin/clip/info"
SCAN_DONE = "/jammin/scan/done"
GET_CLIP_NOTES = "/jammin/clip/get/notes"
CLIP_NOTES = "/jammin/clip/notes"
CLIP_NOTES_DONE = "/jammin/clip/notes/done"
CLIP_CREATE = "/jammin/clip/create"
CLIP_CLEAR_NOTES = "/jammin/clip/clear_notes"
CLIP_ADD_NOTES = "/jammin/clip/add/notes"
CLIP_SET_COLOR = "/jammin/clip/set/color"
OK = "/jammin/ok"
ERROR = "/jammin/error"

REQUEST_ADDRESSES = (
    GET_TEMPO, GET_TIME_SIG, GET_TRACK_NAME, SCAN, GET_CLIP_NOTES,
    CLIP_CREATE, CLIP_CLEAR_NOTES, CLIP_ADD_NOTES, CLIP_SET_COLOR,
)

NOTES_PER_CHUNK = 16
MAX_COLOR_INDEX = 69

GENERATING_COLOR = 9
DONE_COLOR = 18
ERROR_COLOR = 68

DEFAULT_TIMEOUT_S = 3.0


@dataclass(frozen=True)
class ClipAddress:
    track: int
    clip: int

    def __post_init__(self) -> None:
        if self.track < 0 or self.clip < 0:
            raise ValueError(f"negative clip address: {self.track}/{self.clip}")

    def __str__(self) -> str:
        return f"{self.track}.{self.clip}"


@dataclass(frozen=True)
class ClipInfo:
    key: ClipAddress
    name: str
    has_notes: bool
    color_index: int


# (pitch, start_beats, duration_beats, velocity) as sent on the wire
WireNote = tuple[int, float, float, int]


class ProtocolError(RuntimeError):
    """The DAW endpoint answered /jammin/error."""


class ProtocolTimeoutError(ProtocolError):
    """No (terminal) reply arrived within the timeout."""


def notes_to_wire(notes: Iterable[NoteEvent]) -> list[WireNote]:
    return [(n.pitch, ticks_to_beats(n.start), ticks_to_beats(n.duration), n.velocity) for n in notes]


def wire_to_notes(groups: Iterable[WireNote]) -> list[NoteEvent]:
    """Wire note groups -> NoteEvents, liberally clamped into range."""
    out = []
    for pitch, start_beats, dur_beats, velocity in groups:
        out.append(
            NoteEvent(
                pitch=min(127, max(0, int(pitch))),
                start=beats_to_ticks(max(0.0, start_beats)),
                duration=max(1, beats_to_ticks(max(0.0, dur_beats))),
                velocity=min(127, max(1, int(velocity))),
            )
        )
    return out


def flatten_groups(notes: Sequence[WireNote]) -> list[float | int]:
    flat: list[float | int] = []
    for pitch, start, dur, vel in notes:
        flat += [int(pitch), float(start), float(dur), int(vel)]
    return flat


def unflatten_groups(args: Sequence, where: str) -> list[WireNote]:
    if len(args) % 4 != 0:
        raise ProtocolError(f"{where}: note arguments not a multiple of 4 ({len(args)})")
    return [
        (int(args[i]), float(args[i + 1]), float(args[i + 2]), int(args[i + 3]))
        for i in range(0, len(args), 4)
    ]


def chunk_notes(notes: Sequence[WireNote]) -> list[list[WireNote]]:
    if not notes:
        return []
    return [list(notes[i:i + NOTES_PER_CHUNK]) for i in range(0, len(notes), NOTES_PER_CHUNK)]


class LiveClient:
    """Daemon-side protocol client over one UDP transport.

    Exchanges are serialized: one request is in flight at a time (replies
    echo the request address, which is not enough to demux two concurrent
    requests to different clips).  Jobs spend their time in the LLM call,
    so serial OSC traffic costs nothing measurable.
    """

    def __init__(self, transport: UdpTransport, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.transport = transport
        self.timeout_s = timeout_s
        self._lock = threading.Lock()
        self._replies: "queue.Queue[OscMessage]" = queue.Queue()
        transport.start(self._on_message)

    def _on_message(self, message: OscMessage, source: tuple[str, int]) -> None:
        self._replies.put(message)

    def _exchange(
        self,
        request: OscMessage,
        terminal: tuple[str, ...],
        collect: tuple[str, ...] = (),
        timeout_s: Optional[float] = None,
    ) -> tuple[OscMessage, list[OscMessage]]:
        """Send one request; gather ``collect`` messages until a terminal
        reply (or /jammin/error for this request) arrives."""
        deadline_budget = timeout_s if timeout_s is not None else self.timeout_s
        with self._lock:
            while not self._replies.empty():  # stale replies from a timed-out exchange
                try:
                    stale = self._replies.get_nowait()
                    log.debug("discarding stale reply %s", stale.address)
                except queue.Empty:
                    break
            self.transport.send(request)
            collected: list[OscMessage] = []
            budget = deadline_budget
            while True:
                try:
                    reply = self._replies.get(timeout=budget)
                except queue.Empty:
                    raise ProtocolTimeoutError(
                        f"no reply to {request.address} within {deadline_budget}s"
                    ) from None
                if reply.address == ERROR and reply.args and reply.args[0] == request.address:
                    reason = str(reply.args[1]) if len(reply.args) > 1 else "unknown"
                    raise ProtocolError(f"{request.address}: {reason}")
                if reply.address in terminal:
                    return reply, collected
                if reply.address in collect:
                    collected.append(reply)
                else:
                    log.debug("ignoring unexpected reply %s during %s", reply.address, request.address)

    def get_tempo(self) -> float:
        reply, _ = self._exchange(OscMessage(GET_TEMPO), (TEMPO,))
        return float(reply.args[0])

    def get_time_sig(self) -> TimeSig:
        reply, _ = self._exchange(OscMessage(GET_TIME_SIG), (TIME_SIG,))
        return TimeSig(int(reply.args[0]), int(reply.args[1]))

    def get_track_name(self, track: int) -> str:
        reply, _ = self._exchange(OscMessage(GET_TRACK_NAME, (track,)), (TRACK_NAME,))
        return str(reply.args[1])

    def scan(self, timeout_s: Optional[float] = None) -> list[ClipInfo]:
        done, infos = self._exchange(
            OscMessage(SCAN), (SCAN_DONE,), collect=(CLIP_INFO,), timeout_s=timeout_s
        )
        expected = int(done.args[0])
        if expected != len(infos):
            raise ProtocolError(f"scan promised {expected} clips, delivered {len(infos)}")
        return [
            ClipInfo(
                key=ClipAddress(int(m.args[0]), int(m.args[1])),
                name=str(m.args[2]),
                has_notes=bool(int(m.args[3])),
                color_index=int(m.args[4]),
            )
            for m in infos
        ]

    def get_clip_notes(self, key: ClipAddress) -> list[WireNote]:
        done, chunks = self._exchange(
            OscMessage(GET_CLIP_NOTES, (key.track, key.clip)),
            (CLIP_NOTES_DONE,),
            collect=(CLIP_NOTES,),
        )
        notes: list[WireNote] = []
        for chunk in sorted(chunks, key=lambda m: int(m.args[2])):
            notes.extend(unflatten_groups(chunk.args[3:], CLIP_NOTES))
        total = int(done.args[2])
        if total != len(notes):
            raise ProtocolError(f"get/notes promised {total} notes, delivered {len(notes)}")
        return notes

    def read_clip(self, key: ClipAddress, time_sig: TimeSig) -> ClipNotes:
        return normalize_clip(wire_to_notes(self.get_clip_notes(key)), time_sig)

    def create_clip(self, key: ClipAddress, length_beats: float) -> None:
        self._exchange(OscMessage(CLIP_CREATE, (key.track, key.clip, float(length_beats))), (OK,))

    def clear_notes(self, key: ClipAddress) -> None:
        self._exchange(OscMessage(CLIP_CLEAR_NOTES, (key.track, key.clip)), (OK,))

    def add_notes(self, key: ClipAddress, notes: Sequence[WireNote]) -> None:
        for seq, chunk in enumerate(chunk_notes(notes)):
            args = [key.track, key.clip, seq] + flatten_groups(chunk)
            self._exchange(OscMessage(CLIP_ADD_NOTES, tuple(args)), (OK,))

    def write_clip(self, key: ClipAddress, clip: ClipNotes, clear_first: bool) -> None:
        """create + (clear) + chunked add; the protocol's replace recipe."""
        self.create_clip(key, ticks_to_beats(clip.length))
        if clear_first:
            self.clear_notes(key)
        self.add_notes(key, notes_to_wire(clip.notes))

    def set_color(self, key: ClipAddress, color_index: int) -> None:
        self._exchange(OscMessage(CLIP_SET_COLOR, (key.track, key.clip, color_index)), (OK,))

    def close(self) -> None:
        self.transport.close()
