"""Command line entry points: run the daemon, run the simulator, convert
text formats to MIDI files, one-shot generation to a MIDI file.

Exit codes: 0 ok, 2 config error, 3 protocol unreachable, 4 backend auth
failure, 5 parse/convert failure.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
from pathlib import Path

from .config import Config, ConfigError, load_config
from .engine import Engine, SessionState, extract_bars_hint
from .formats import SelectionMode, select_by_keyword
from .llm import (
    BackendAuthError,
    BackendConfig,
    ExhaustedRetriesError,
    GenRequest,
    HttpBackend,
    MockBackend,
    generate_with_retry,
)
from .notes import FOUR_FOUR, TimeSig, TrackContext
from .osc import UdpTransport
from .protocol import LiveClient, ProtocolError
from .sim import ScenarioError, load_scenario, serve
from .smf import write_smf_file
from .textmusic import FormatTag, parse_abc, parse_chords, parse_drumtab

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNREACHABLE = 3
EXIT_AUTH = 4
EXIT_PARSE = 5

log = logging.getLogger("jammin.cli")


def _parse_meter(text: str) -> TimeSig:
    try:
        num, den = text.split("/", 1)
        return TimeSig(int(num), int(den))
    except ValueError as exc:
        raise ConfigError(f"bad meter {text!r}: {exc}") from None


def _make_backend(config: Config, mock_dir: str | None):
    if mock_dir:
        return MockBackend(mock_dir)
    if config.fixture_dir:
        return MockBackend(config.fixture_dir)
    return HttpBackend(config.backend)


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else Config()
    backend = _make_backend(config, args.mock_llm)
    transport = UdpTransport(
        local_port=config.listen_port,
        peer_host=config.daw_host,
        peer_port=config.daw_port,
    )
    client = LiveClient(transport)
    try:
        tempo = client.get_tempo()
    except ProtocolError as exc:
        log.error("DAW endpoint unreachable at %s:%d (%s)", config.daw_host, config.daw_port, exc)
        client.close()
        return EXIT_UNREACHABLE
    log.info("connected; song tempo %.1f BPM", tempo)

    state = SessionState(snapshot_path=config.snapshot_path, poll_interval_s=config.poll_interval_s)
    engine = Engine(
        client,
        backend,
        state=state,
        colors=config.colors,
        selection_mode=config.selection_mode,
    )
    signal.signal(signal.SIGINT, lambda *_: engine.stop())
    signal.signal(signal.SIGTERM, lambda *_: engine.stop())
    try:
        engine.run_forever()
    finally:
        client.close()
    return EXIT_OK


def cmd_sim(args: argparse.Namespace) -> int:
    try:
        sim_set = load_scenario(args.scenario)
    except ScenarioError as exc:
        log.error("bad scenario: %s", exc)
        return EXIT_CONFIG
    server = serve(sim_set, port=args.port)
    print(f"simulator listening on udp/{server.port}; control: rename T C NAME | dump | quit", flush=True)
    try:
        for line in sys.stdin:
            words = line.strip().split(maxsplit=3)
            if not words:
                continue
            if words[0] == "quit":
                break
            if words[0] == "dump":
                from .sim import scenario_to_dict
                import json as _json

                print(_json.dumps(scenario_to_dict(server.set), indent=2), flush=True)
                continue
            if words[0] == "rename" and len(words) == 4:
                try:
                    server.inject_rename(int(words[1]), int(words[2]), words[3])
                except ValueError as exc:
                    print(f"error: {exc}", flush=True)
                continue
            print(f"error: unknown control command: {line.strip()!r}", flush=True)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def _parse_by_format(fmt: str, text: str, meter: TimeSig):
    """Returns (clip, tempo override from the text or None)."""
    if fmt == "abc":
        clip, header = parse_abc(text)
        return clip, header.tempo_bpm
    if fmt == "chords":
        return parse_chords(text, meter), None
    if fmt == "drumtab":
        return parse_drumtab(text, meter), None
    raise ConfigError(f"unknown format: {fmt}")


def cmd_convert(args: argparse.Namespace) -> int:
    meter = _parse_meter(args.meter)
    text = Path(args.infile).read_text(encoding="utf-8")
    try:
        clip, text_tempo = _parse_by_format(args.format, text, meter)
    except ValueError as exc:
        log.error("cannot parse %s as %s: %s", args.infile, args.format, exc)
        return EXIT_PARSE
    tempo = args.tempo if args.tempo is not None else (text_tempo or 120.0)
    write_smf_file(clip, tempo, args.outfile)
    print(f"wrote {args.outfile}: {len(clip.notes)} notes, {clip.bars} bars at {tempo:g} BPM")
    return EXIT_OK


def cmd_oneshot(args: argparse.Namespace) -> int:
    config = load_config(args.config) if args.config else Config()
    backend = _make_backend(config, args.mock_llm)
    meter = _parse_meter(args.meter)
    track = TrackContext(args.track_name, args.tempo, meter)
    fmt = FormatTag(args.format) if args.format else select_by_keyword(args.prompt, track)
    request = GenRequest(
        clip_name=args.prompt,
        track=track,
        format=fmt,
        bars_hint=extract_bars_hint(args.prompt),
    )
    try:
        clip = generate_with_retry(request, backend)
    except BackendAuthError as exc:
        log.error("backend auth failure: %s", exc)
        return EXIT_AUTH
    except ExhaustedRetriesError as exc:
        log.error("generation failed: %s", exc)
        return EXIT_PARSE
    write_smf_file(clip, args.tempo, args.outfile)
    print(f"wrote {args.outfile}: {fmt.value}, {len(clip.notes)} notes, {clip.bars} bars")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jammin", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the daemon against a DAW endpoint")
    run.add_argument("--config", help="config file (INI); defaults apply without one")
    run.add_argument("--mock-llm", metavar="FIXTURE_DIR", help="answer prompts from fixture files")
    run.set_defaults(fn=cmd_run)

    sim = sub.add_parser("sim", help="run the DAW simulator with stdin control")
    sim.add_argument("--scenario", required=True, help="scenario JSON file")
    sim.add_argument("--port", type=int, default=19000)
    sim.set_defaults(fn=cmd_sim)

    convert = sub.add_parser("convert", help="convert a text music file to a MIDI file")
    convert.add_argument("--format", required=True, choices=["abc", "chords", "drumtab"])
    convert.add_argument("--in", dest="infile", required=True)
    convert.add_argument("--out", dest="outfile", required=True)
    convert.add_argument("--tempo", type=float, default=None, help="BPM (default: from the text, else 120)")
    convert.add_argument("--meter", default="4/4")
    convert.set_defaults(fn=cmd_convert)

    oneshot = sub.add_parser("oneshot", help="prompt -> parse -> MIDI file, no DAW needed")
    oneshot.add_argument("prompt")
    oneshot.add_argument("--track-name", required=True)
    oneshot.add_argument("--out", dest="outfile", required=True)
    oneshot.add_argument("--format", choices=["abc", "chords", "drumtab"])
    oneshot.add_argument("--tempo", type=float, default=120.0)
    oneshot.add_argument("--meter", default="4/4")
    oneshot.add_argument("--config")
    oneshot.add_argument("--mock-llm", metavar="FIXTURE_DIR")
    oneshot.set_defaults(fn=cmd_oneshot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.fn(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_UNREACHABLE
    except BackendAuthError as exc:
        log.error("backend auth failure: %s", exc)
        return EXIT_AUTH
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
