"""Regenerate the golden byte fixtures.

Run from the repo root:  python3 tests/golden/gen.py

osc_messages.json is packed by the independent oracle encoder (the three
primitive entries are additionally hand-checked against their documented
byte layouts).  protocol_cases.json replays a fixed request sequence
against the simulator dispatcher loaded with golden_scenario.json; the
remote script's conformance suite must reproduce the same reply bytes.
"""

import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parents[0]))

from oracles.osc_oracle import pack_bundle, pack_message  # noqa: E402

from jammin.osc import OscMessage, encode  # noqa: E402
from jammin.sim import SimDispatcher, load_scenario  # noqa: E402

GOLDEN_MESSAGES = [
    ("empty address ping", "/ping", []),
    ("single int32", "/a", [1]),
    ("empty string still pads", "/s", [""]),
    ("tempo request, no args", "/jammin/song/get/tempo", []),
    ("tempo reply, float32", "/jammin/song/tempo", [110.0]),
    ("time signature reply", "/jammin/song/time_sig", [4, 4]),
    ("track name reply", "/jammin/track/name", [0, "Bass"]),
    ("clip info reply", "/jammin/clip/info", [0, 0, "groove", 1, 9]),
    ("clip create request", "/jammin/clip/create", [1, 0, 8.0]),
    (
        "clip notes reply, two groups",
        "/jammin/clip/notes",
        [0, 0, 0, 36, 0.0, 1.0, 100, 43, 1.0, 0.5, 96],
    ),
    ("error reply", "/jammin/error", ["/jammin/clip/set/color", "color out of range"]),
    ("blob with padding", "/blob", [b"\x01\x02\x03"]),
]

REQUEST_SEQUENCE = [
    ("tempo", "/jammin/song/get/tempo", []),
    ("time_sig", "/jammin/song/get/time_sig", []),
    ("track name 0", "/jammin/track/get/name", [0]),
    ("track name out of range", "/jammin/track/get/name", [7]),
    ("initial scan", "/jammin/scan", []),
    ("read groove notes", "/jammin/clip/get/notes", [0, 0]),
    ("read empty slot", "/jammin/clip/get/notes", [0, 1]),
    ("create drum clip", "/jammin/clip/create", [1, 0, 8.0]),
    ("create existing clip is a no-op", "/jammin/clip/create", [1, 0, 4.0]),
    (
        "add two drum notes",
        "/jammin/clip/add/notes",
        [1, 0, 0, 38, 0.0, 0.25, 100, 42, 0.5, 0.25, 90],
    ),
    ("read drum notes back", "/jammin/clip/get/notes", [1, 0]),
    ("set color done", "/jammin/clip/set/color", [1, 0, 18]),
    ("set color out of range", "/jammin/clip/set/color", [1, 0, 70]),
    ("clear drum notes", "/jammin/clip/clear_notes", [1, 0]),
    ("scan after mutations", "/jammin/scan", []),
    ("unknown address", "/jammin/song/set/tempo", [120.0]),
]


def arg_spec(value):
    if isinstance(value, bool):
        raise TypeError("bool is not wire-safe")
    if isinstance(value, int):
        return {"t": "i", "v": value}
    if isinstance(value, float):
        return {"t": "f", "v": value}
    if isinstance(value, str):
        return {"t": "s", "v": value}
    return {"t": "b", "v": value.hex()}


def main() -> None:
    messages = []
    for description, address, args in GOLDEN_MESSAGES:
        packed = pack_message(address, args)
        own = encode(OscMessage(address, tuple(args)))
        if packed != own:
            raise SystemExit(f"oracle and package encoders disagree on {address}: {packed.hex()} vs {own.hex()}")
        messages.append(
            {
                "description": description,
                "address": address,
                "args": [arg_spec(a) for a in args],
                "hex": packed.hex(),
            }
        )
    bundle = pack_bundle([pack_message("/ping", []), pack_message("/a", [1])])
    osc_doc = {
        "messages": messages,
        "bundles": [
            {
                "description": "bundle of ping + int32, flattens in order",
                "hex": bundle.hex(),
                "contains": [{"address": "/ping", "args": []}, {"address": "/a", "args": [arg_spec(1)]}],
            }
        ],
    }
    (HERE / "osc_messages.json").write_text(json.dumps(osc_doc, indent=1))

    dispatcher = SimDispatcher(load_scenario(HERE / "golden_scenario.json"))
    cases = []
    for description, address, args in REQUEST_SEQUENCE:
        request = OscMessage(address, tuple(args))
        replies = dispatcher.handle_request(request)
        cases.append(
            {
                "description": description,
                "request_hex": encode(request).hex(),
                "reply_hex": [encode(r).hex() for r in replies],
            }
        )
    protocol_doc = {"scenario": "golden_scenario.json", "cases": cases}
    (HERE / "protocol_cases.json").write_text(json.dumps(protocol_doc, indent=1))
    print(f"wrote osc_messages.json ({len(messages)} messages) and protocol_cases.json ({len(cases)} cases)")


if __name__ == "__main__":
    main()
