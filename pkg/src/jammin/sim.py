"""Protocol-conformant simulated DAW endpoint.

Holds an in-memory track/clip grid, answers every /jammin/* request over
UDP exactly like the in-DAW remote script, logs every request and
mutation, and supports scripted renames (the "user types a clip name"
event).  No playback, no audio: it models only what the protocol exposes.
"""

from __future__ import annotations

import json
import logging
import queue
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema

from . import protocol
from .notes import (
    ClipNotes,
    NoteEvent,
    TimeSig,
    Tick,
    beats_to_ticks,
    clip_from_notes,
    ticks_to_beats,
)
from .osc import OscMessage, UdpTransport

log = logging.getLogger("jammin.sim")


class ScenarioError(ValueError):
    """Scenario file violates the schema; message carries a JSON pointer."""


class SimRequestError(RuntimeError):
    """Turned into a /jammin/error reply by the dispatcher."""


@dataclass
class SimClip:
    name: str = ""
    color_index: int = 0
    notes: list[NoteEvent] = field(default_factory=list)
    length_ticks: Optional[Tick] = None

    def sorted_notes(self) -> list[NoteEvent]:
        return sorted(self.notes, key=NoteEvent.sort_key)


@dataclass
class SimTrack:
    name: str
    clips: list[Optional[SimClip]]


@dataclass
class SimSet:
    tracks: list[SimTrack]
    tempo_bpm: float = 120.0
    time_sig: TimeSig = TimeSig(4, 4)

    def clip_slot(self, track: int, clip: int) -> Optional[SimClip]:
        if not 0 <= track < len(self.tracks):
            raise SimRequestError(f"no such track: {track}")
        slots = self.tracks[track].clips
        if not 0 <= clip < len(slots):
            raise SimRequestError(f"no such clip slot: {track}/{clip}")
        return slots[clip]

    def existing_clip(self, track: int, clip: int) -> SimClip:
        slot = self.clip_slot(track, clip)
        if slot is None:
            raise SimRequestError(f"empty clip slot: {track}/{clip}")
        return slot


SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["tempo", "time_sig", "tracks"],
    "additionalProperties": False,
    "properties": {
        "tempo": {"type": "number", "exclusiveMinimum": 0},
        "time_sig": {
            "type": "array",
            "items": {"type": "integer"},
            "minItems": 2,
            "maxItems": 2,
        },
        "tracks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string"},
                    "clips": {
                        "type": "array",
                        "items": {
                            "oneOf": [
                                {"type": "null"},
                                {
                                    "type": "object",
                                    "additionalProperties": False,
                                    "properties": {
                                        "name": {"type": "string"},
                                        "color": {"type": "integer", "minimum": 0, "maximum": 69},
                                        "length_beats": {"type": "number", "exclusiveMinimum": 0},
                                        "notes": {
                                            "type": "array",
                                            "items": {
                                                "type": "array",
                                                "minItems": 4,
                                                "maxItems": 4,
                                                "items": [
                                                    {"type": "integer", "minimum": 0, "maximum": 127},
                                                    {"type": "number", "minimum": 0},
                                                    {"type": "number", "exclusiveMinimum": 0},
                                                    {"type": "integer", "minimum": 1, "maximum": 127},
                                                ],
                                            },
                                        },
                                    },
                                },
                            ]
                        },
                    },
                },
            },
        },
    },
}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def scenario_from_dict(data: dict) -> SimSet:
    validator = jsonschema.Draft7Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        raise ScenarioError(f"{_pointer(first.absolute_path)}: {first.message}")
    num, den = data["time_sig"]
    try:
        time_sig = TimeSig(num, den)
    except ValueError as exc:
        raise ScenarioError(f"/time_sig: {exc}") from None
    tracks: list[SimTrack] = []
    width = max((len(t.get("clips", [])) for t in data["tracks"]), default=0)
    for t_index, track_data in enumerate(data["tracks"]):
        clips: list[Optional[SimClip]] = []
        for c_index, clip_data in enumerate(track_data.get("clips", [])):
            if clip_data is None:
                clips.append(None)
                continue
            notes = [
                NoteEvent(p, beats_to_ticks(s), max(1, beats_to_ticks(d)), v)
                for p, s, d, v in clip_data.get("notes", [])
            ]
            length = clip_data.get("length_beats")
            clips.append(
                SimClip(
                    name=clip_data.get("name", ""),
                    color_index=clip_data.get("color", 0),
                    notes=sorted(notes, key=NoteEvent.sort_key),
                    length_ticks=beats_to_ticks(length) if length is not None else None,
                )
            )
        clips += [None] * (width - len(clips))  # pad to a rectangular grid
        tracks.append(SimTrack(name=track_data["name"], clips=clips))
    return SimSet(tracks=tracks, tempo_bpm=float(data["tempo"]), time_sig=time_sig)


def load_scenario(path: str | Path) -> SimSet:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"/: not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError("/: scenario root must be an object")
    return scenario_from_dict(data)


def scenario_to_dict(sim_set: SimSet) -> dict:
    def clip_dict(clip: Optional[SimClip]):
        if clip is None:
            return None
        out: dict[str, Any] = {"name": clip.name, "color": clip.color_index}
        if clip.length_ticks is not None:
            out["length_beats"] = ticks_to_beats(clip.length_ticks)
        out["notes"] = [
            [n.pitch, ticks_to_beats(n.start), ticks_to_beats(n.duration), n.velocity]
            for n in clip.sorted_notes()
        ]
        return out

    return {
        "tempo": sim_set.tempo_bpm,
        "time_sig": [sim_set.time_sig.numerator, sim_set.time_sig.denominator],
        "tracks": [
            {"name": t.name, "clips": [clip_dict(c) for c in t.clips]}
            for t in sim_set.tracks
        ],
    }


def canonical_state_bytes(sim_set: SimSet) -> bytes:
    """Deterministic serialization of the full set, for state comparisons."""
    return json.dumps(scenario_to_dict(sim_set), sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class EventLogEntry:
    seq: int
    request: str
    replies: tuple[str, ...]
    mutation: Optional[dict]


class EventLog:
    def __init__(self) -> None:
        self.entries: list[EventLogEntry] = []
        self._seq = 0

    def record(self, request: str, replies: tuple[str, ...], mutation: Optional[dict]) -> None:
        self._seq += 1
        self.entries.append(EventLogEntry(self._seq, request, replies, mutation))

    def mutations(self) -> list[dict]:
        return [e.mutation for e in self.entries if e.mutation is not None]


def replay_mutations(initial: SimSet, mutations: list[dict]) -> SimSet:
    """Re-apply a recorded mutation stream; used to prove the event log
    fully determines the final state."""
    import copy

    state = copy.deepcopy(initial)
    for m in mutations:
        op = m["op"]
        if op == "rename":
            _apply_rename(state, m["track"], m["clip"], m["name"])
            continue
        track, clip = m["track"], m["clip"]
        if op == "create":
            if state.clip_slot(track, clip) is None:
                state.tracks[track].clips[clip] = SimClip(length_ticks=m["length_ticks"])
        elif op == "clear":
            state.existing_clip(track, clip).notes = []
        elif op == "add_notes":
            target = state.existing_clip(track, clip)
            target.notes.extend(NoteEvent(*n) for n in m["notes"])
            target.notes.sort(key=NoteEvent.sort_key)
        elif op == "set_color":
            state.existing_clip(track, clip).color_index = m["color"]
        else:
            raise ValueError(f"unknown mutation op: {op}")
    return state


def _apply_rename(sim_set: SimSet, track: int, clip: int, name: str) -> None:
    slot = sim_set.clip_slot(track, clip)
    if slot is None:
        sim_set.tracks[track].clips[clip] = SimClip(name=name)
    else:
        slot.name = name


class SimDispatcher:
    """Socket-free protocol endpoint: request message -> reply messages.

    Also used directly by the golden-fixture suite and for byte-level
    comparison with the in-DAW remote script.
    """

    def __init__(self, sim_set: SimSet):
        self.set = sim_set
        self.log = EventLog()
        self._handlers = {
            protocol.GET_TEMPO: self._h_get_tempo,
            protocol.GET_TIME_SIG: self._h_get_time_sig,
            protocol.GET_TRACK_NAME: self._h_get_track_name,
            protocol.SCAN: self._h_scan,
            protocol.GET_CLIP_NOTES: self._h_get_notes,
            protocol.CLIP_CREATE: self._h_create,
            protocol.CLIP_CLEAR_NOTES: self._h_clear,
            protocol.CLIP_ADD_NOTES: self._h_add_notes,
            protocol.CLIP_SET_COLOR: self._h_set_color,
        }

    def handle_request(self, message: OscMessage) -> list[OscMessage]:
        """Pure request -> replies dispatch (also used by golden tests)."""
        handler = self._handlers.get(message.address)
        mutation: Optional[dict] = None
        if handler is None:
            replies = [OscMessage(protocol.ERROR, (message.address, "unknown address"))]
        else:
            try:
                replies, mutation = handler(message.args)
            except SimRequestError as exc:
                replies = [OscMessage(protocol.ERROR, (message.address, str(exc)))]
            except (IndexError, TypeError, ValueError) as exc:
                replies = [OscMessage(protocol.ERROR, (message.address, f"bad arguments: {exc}"))]
        self.log.record(
            f"{message.address} {message.args!r}",
            tuple(r.address for r in replies),
            mutation,
        )
        return replies

    # -- handlers ----------------------------------------------------------

    def _h_get_tempo(self, args):
        return [OscMessage(protocol.TEMPO, (float(self.set.tempo_bpm),))], None

    def _h_get_time_sig(self, args):
        ts = self.set.time_sig
        return [OscMessage(protocol.TIME_SIG, (ts.numerator, ts.denominator))], None

    def _h_get_track_name(self, args):
        track = int(args[0])
        if not 0 <= track < len(self.set.tracks):
            raise SimRequestError(f"no such track: {track}")
        return [OscMessage(protocol.TRACK_NAME, (track, self.set.tracks[track].name))], None

    def _h_scan(self, args):
        replies = []
        for t_index, track in enumerate(self.set.tracks):
            for c_index, clip in enumerate(track.clips):
                if clip is None:
                    continue
                replies.append(
                    OscMessage(
                        protocol.CLIP_INFO,
                        (t_index, c_index, clip.name, 1 if clip.notes else 0, clip.color_index),
                    )
                )
        replies.append(OscMessage(protocol.SCAN_DONE, (len(replies),)))
        return replies, None

    def _h_get_notes(self, args):
        track, clip_index = int(args[0]), int(args[1])
        clip = self.set.existing_clip(track, clip_index)
        wire = protocol.notes_to_wire(clip.sorted_notes())
        replies = []
        for seq, chunk in enumerate(protocol.chunk_notes(wire)):
            replies.append(
                OscMessage(
                    protocol.CLIP_NOTES,
                    tuple([track, clip_index, seq] + protocol.flatten_groups(chunk)),
                )
            )
        replies.append(OscMessage(protocol.CLIP_NOTES_DONE, (track, clip_index, len(wire))))
        return replies, None

    def _h_create(self, args):
        track, clip_index, length_beats = int(args[0]), int(args[1]), float(args[2])
        if length_beats <= 0:
            raise SimRequestError(f"non-positive clip length: {length_beats}")
        slot = self.set.clip_slot(track, clip_index)
        if slot is not None:
            return [OscMessage(protocol.OK, (protocol.CLIP_CREATE,))], None
        length_ticks = max(1, beats_to_ticks(length_beats))
        self.set.tracks[track].clips[clip_index] = SimClip(length_ticks=length_ticks)
        mutation = {"op": "create", "track": track, "clip": clip_index, "length_ticks": length_ticks}
        return [OscMessage(protocol.OK, (protocol.CLIP_CREATE,))], mutation

    def _h_clear(self, args):
        track, clip_index = int(args[0]), int(args[1])
        clip = self.set.existing_clip(track, clip_index)
        clip.notes = []
        mutation = {"op": "clear", "track": track, "clip": clip_index}
        return [OscMessage(protocol.OK, (protocol.CLIP_CLEAR_NOTES,))], mutation

    def _h_add_notes(self, args):
        track, clip_index = int(args[0]), int(args[1])
        # args[2] is the chunk sequence number; append semantics make it
        # informational only
        clip = self.set.existing_clip(track, clip_index)
        groups = protocol.unflatten_groups(args[3:], protocol.CLIP_ADD_NOTES)
        added = protocol.wire_to_notes(groups)
        clip.notes.extend(added)
        clip.notes.sort(key=NoteEvent.sort_key)
        mutation = {
            "op": "add_notes",
            "track": track,
            "clip": clip_index,
            "notes": [[n.pitch, n.start, n.duration, n.velocity] for n in added],
        }
        return [OscMessage(protocol.OK, (protocol.CLIP_ADD_NOTES,))], mutation

    def _h_set_color(self, args):
        track, clip_index, color = int(args[0]), int(args[1]), int(args[2])
        clip = self.set.existing_clip(track, clip_index)
        if not 0 <= color <= protocol.MAX_COLOR_INDEX:
            raise SimRequestError("color out of range")
        clip.color_index = color
        mutation = {"op": "set_color", "track": track, "clip": clip_index, "color": color}
        return [OscMessage(protocol.OK, (protocol.CLIP_SET_COLOR,))], mutation

    # -- control channel -----------------------------------------------------

    def apply_rename(self, track: int, clip: int, name: str) -> None:
        """The scripted "user types a clip name" event."""
        _apply_rename(self.set, track, clip, name)
        self.log.record(
            f"rename {track} {clip} {name!r}",
            (),
            {"op": "rename", "track": track, "clip": clip, "name": name},
        )

    def color_history(self, track: int, clip: int) -> list[int]:
        return [
            m["color"]
            for m in self.log.mutations()
            if m["op"] == "set_color" and m["track"] == track and m["clip"] == clip
        ]

    def clip_contents(self, track: int, clip: int) -> ClipNotes:
        sim_clip = self.set.existing_clip(track, clip)
        return clip_from_notes(sim_clip.sorted_notes(), self.set.time_sig)


class SimServer:
    """Serves one SimSet over UDP until closed.

    Request handling is single threaded (the transport's receive thread);
    control commands (renames) are queued and executed on that same thread
    between datagrams, so the set is never touched concurrently.
    """

    def __init__(self, sim_set: SimSet, port: int = protocol.DAW_PORT, bind_host: str = "127.0.0.1"):
        self.dispatcher = SimDispatcher(sim_set)
        self._control: "queue.Queue[tuple[int, int, str]]" = queue.Queue()
        self.transport = UdpTransport(local_port=port, bind_host=bind_host)
        self.port = self.transport.local_port
        self.transport.start(self._on_message, on_idle=self._drain_control)

    @property
    def set(self) -> SimSet:
        return self.dispatcher.set

    @property
    def log(self) -> EventLog:
        return self.dispatcher.log

    def _on_message(self, message: OscMessage, source: tuple[str, int]) -> None:
        self._drain_control()
        for reply in self.dispatcher.handle_request(message):
            self.transport.send(reply, to=source)

    def inject_rename(self, track: int, clip: int, name: str) -> None:
        """Queue a scripted rename; executed on the serving thread."""
        self._control.put((track, clip, name))

    def _drain_control(self) -> None:
        while True:
            try:
                track, clip, name = self._control.get_nowait()
            except queue.Empty:
                return
            try:
                self.dispatcher.apply_rename(track, clip, name)
            except SimRequestError as exc:
                log.warning("rename rejected: %s", exc)

    def color_history(self, track: int, clip: int) -> list[int]:
        return self.dispatcher.color_history(track, clip)

    def clip_contents(self, track: int, clip: int) -> ClipNotes:
        return self.dispatcher.clip_contents(track, clip)

    def close(self) -> None:
        self.transport.close()

    def __enter__(self) -> "SimServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def serve(sim_set: SimSet, port: int = protocol.DAW_PORT, bind_host: str = "127.0.0.1") -> SimServer:
    return SimServer(sim_set, port=port, bind_host=bind_host)
