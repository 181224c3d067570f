"""Shared fixtures and helpers for the jammin test suite."""

from __future__ import annotations

import random
import sys
import threading
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))  # tests/oracles

from jammin.engine import Engine, SessionState
from jammin.llm import Backend, BackendError, ChatMessage, MockBackend
from jammin.notes import FOUR_FOUR, ClipNotes, NoteEvent, TimeSig, clip_from_notes
from jammin.osc import UdpTransport
from jammin.protocol import LiveClient
from jammin.sim import SimServer, SimSet, load_scenario, serve

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURE_DIR = REPO_ROOT / "fixtures"
SCENARIO_DIR = REPO_ROOT / "scenarios"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"
CORPUS_DIR = Path(__file__).resolve().parent / "corpus"


class ScriptedBackend:
    """Backend returning a fixed reply sequence; raises when exhausted."""

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, messages: list[ChatMessage]) -> str:
        self.calls += 1
        if not self.replies:
            raise BackendError("scripted backend exhausted")
        return self.replies.pop(0)


def make_random_clip(rng: random.Random, time_sig: TimeSig = FOUR_FOUR, max_bars: int = 8) -> ClipNotes:
    """A random clip in the ABC renderer's representable family: notes and
    equal-duration chords on the 30-tick grid, never partially overlapping."""
    bar = time_sig.bar_ticks
    total = rng.randint(1, max_bars) * bar
    notes: list[NoteEvent] = []
    pos = 0
    while pos < total:
        max_units = (total - pos) // 30
        duration = 30 * rng.randint(1, min(max_units, 32))
        roll = rng.random()
        if roll < 0.25:
            pos += duration
            continue
        if roll < 0.85:
            notes.append(NoteEvent(rng.randint(24, 96), pos, duration, 96))
        else:
            for pitch in rng.sample(range(24, 97), rng.randint(2, 4)):
                notes.append(NoteEvent(pitch, pos, duration, 96))
        pos += duration
    return clip_from_notes(notes, time_sig, min_end=total)


class SessionHarness:
    """Simulator + daemon engine wired over real UDP loopback."""

    def __init__(self, scenario: Path | SimSet, backend: Backend, poll_interval_s: float = 0.15,
                 snapshot_path: Path | None = None):
        sim_set = load_scenario(scenario) if isinstance(scenario, (str, Path)) else scenario
        self.server: SimServer = serve(sim_set, port=0)
        self.transport = UdpTransport(local_port=0, peer_host="127.0.0.1", peer_port=self.server.port)
        self.client = LiveClient(self.transport)
        self.state = SessionState(snapshot_path=snapshot_path, poll_interval_s=poll_interval_s)
        self.engine = Engine(self.client, backend, state=self.state)
        self._thread = threading.Thread(target=self.engine.run_forever, daemon=True)
        self._thread.start()

    def rename(self, track: int, clip: int, name: str) -> None:
        self.server.inject_rename(track, clip, name)

    def wait_for_colors(self, targets: dict[tuple[int, int], int], timeout_s: float = 10.0) -> bool:
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            if all(
                self.server.color_history(t, c)[-1:] == [color]
                for (t, c), color in targets.items()
            ):
                return True
            time.sleep(0.05)
        return False

    def close(self) -> None:
        self.engine.stop()
        self._thread.join(timeout=5)
        self.client.close()
        self.server.close()

    def __enter__(self) -> "SessionHarness":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@pytest.fixture
def mock_backend() -> MockBackend:
    return MockBackend(FIXTURE_DIR)


@pytest.fixture
def two_tracks_scenario() -> Path:
    return SCENARIO_DIR / "two_tracks.json"


@pytest.fixture
def edit_scenario() -> Path:
    return SCENARIO_DIR / "edit_clip.json"
