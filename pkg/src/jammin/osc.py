"""OSC 1.0 wire format (i/f/s/b tags only) and a UDP transport.

Encoding is bit-exact against the golden fixtures in tests/golden/.
Bundles are accepted on receive (flattened, timetags ignored) but never
sent.  The decoder must survive arbitrary bytes: every malformed packet
raises OscDecodeError, nothing else.
"""

from __future__ import annotations

import logging
import re
import socket
import struct
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Union

log = logging.getLogger("jammin.osc")

MAX_BLOB = 65000
MAX_DATAGRAM = 65507
_BUNDLE_PREFIX = b"#bundle\x00"
_ADDRESS_RE = re.compile(r"^/[!-~]+$")

OscArg = Union[int, float, str, bytes]


class OscEncodeError(ValueError):
    pass


class OscDecodeError(ValueError):
    pass


class OscTransportClosed(RuntimeError):
    pass


@dataclass(frozen=True)
class OscMessage:
    address: str
    args: tuple[OscArg, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))

    @property
    def type_tags(self) -> str:
        return "," + "".join(_tag_for(a) for a in self.args)


def _tag_for(arg: OscArg) -> str:
    # bool is an int subclass; reject explicitly rather than send garbage
    if isinstance(arg, bool):
        raise OscEncodeError("bool is not an OSC type")
    if isinstance(arg, int):
        return "i"
    if isinstance(arg, float):
        return "f"
    if isinstance(arg, str):
        return "s"
    if isinstance(arg, (bytes, bytearray)):
        return "b"
    raise OscEncodeError(f"unsupported OSC value kind: {type(arg).__name__}")


def _pad_string(text: str) -> bytes:
    try:
        raw = text.encode("ascii")
    except UnicodeEncodeError as exc:
        raise OscEncodeError(f"non-ASCII OSC string: {text!r}") from exc
    if b"\x00" in raw:
        raise OscEncodeError("OSC string contains NUL")
    raw += b"\x00"
    return raw + b"\x00" * (-len(raw) % 4)


def encode(message: OscMessage) -> bytes:
    """Message -> OSC 1.0 packet (length always a multiple of 4)."""
    if not _ADDRESS_RE.match(message.address):
        raise OscEncodeError(f"invalid OSC address: {message.address!r}")
    out = bytearray()
    out += _pad_string(message.address)
    out += _pad_string(message.type_tags)
    for arg in message.args:
        tag = _tag_for(arg)
        if tag == "i":
            if not -(2**31) <= arg <= 2**31 - 1:
                raise OscEncodeError(f"int32 out of range: {arg}")
            out += struct.pack(">i", arg)
        elif tag == "f":
            out += struct.pack(">f", arg)
        elif tag == "s":
            out += _pad_string(arg)  # type: ignore[arg-type]
        else:
            blob = bytes(arg)  # type: ignore[arg-type]
            if len(blob) > MAX_BLOB:
                raise OscEncodeError(f"blob too large: {len(blob)} bytes")
            out += struct.pack(">i", len(blob))
            out += blob
            out += b"\x00" * (-len(blob) % 4)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.remaining() < n:
            raise OscDecodeError("truncated packet")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def string(self) -> str:
        nul = self.data.find(b"\x00", self.pos)
        if nul < 0:
            raise OscDecodeError("unterminated string")
        raw = self.data[self.pos:nul]
        advance = (nul - self.pos + 1 + 3) // 4 * 4
        if self.pos + advance > len(self.data):
            raise OscDecodeError("string padding overruns packet")
        self.pos += advance
        try:
            return raw.decode("ascii")
        except UnicodeDecodeError as exc:
            raise OscDecodeError("non-ASCII string") from exc


def _decode_message(reader: _Reader) -> OscMessage:
    address = reader.string()
    if not address.startswith("/"):
        raise OscDecodeError(f"address does not start with '/': {address!r}")
    tags = reader.string()
    if not tags.startswith(","):
        raise OscDecodeError(f"type tag string does not start with ',': {tags!r}")
    args: list[OscArg] = []
    for tag in tags[1:]:
        if tag == "i":
            args.append(struct.unpack(">i", reader.take(4))[0])
        elif tag == "f":
            args.append(struct.unpack(">f", reader.take(4))[0])
        elif tag == "s":
            args.append(reader.string())
        elif tag == "b":
            size = struct.unpack(">i", reader.take(4))[0]
            if size < 0 or size > MAX_BLOB:
                raise OscDecodeError(f"blob length out of range: {size}")
            blob = reader.take(size)
            reader.take(-size % 4)
            args.append(blob)
        else:
            raise OscDecodeError(f"unknown type tag: {tag!r}")
    if reader.remaining():
        raise OscDecodeError(f"{reader.remaining()} trailing bytes after arguments")
    return OscMessage(address, tuple(args))


def _decode_bundle(data: bytes, depth: int) -> list[OscMessage]:
    if depth > 8:
        raise OscDecodeError("bundle nesting too deep")
    reader = _Reader(data)
    reader.take(len(_BUNDLE_PREFIX))
    reader.take(8)  # timetag, ignored
    out: list[OscMessage] = []
    while reader.remaining():
        size = struct.unpack(">i", reader.take(4))[0]
        if size <= 0 or size % 4 != 0:
            raise OscDecodeError(f"bad bundle element size: {size}")
        element = reader.take(size)
        if element.startswith(_BUNDLE_PREFIX):
            out.extend(_decode_bundle(element, depth + 1))
        else:
            out.append(_decode_message(_Reader(element)))
    return out


def decode(packet: bytes) -> OscMessage | list[OscMessage]:
    """Packet -> message, or list of messages for a bundle."""
    if len(packet) == 0 or len(packet) % 4 != 0:
        raise OscDecodeError(f"packet length {len(packet)} is not a positive multiple of 4")
    if packet.startswith(_BUNDLE_PREFIX):
        return _decode_bundle(packet, 0)
    return _decode_message(_Reader(packet))


def decode_flat(packet: bytes) -> list[OscMessage]:
    decoded = decode(packet)
    return decoded if isinstance(decoded, list) else [decoded]


Handler = Callable[[OscMessage, tuple[str, int]], None]


class UdpTransport:
    """One UDP socket with a single receive thread.

    The handler runs on the receive thread, one message at a time, in
    datagram arrival order; it must not block.  Malformed datagrams are
    counted, logged, and dropped.  ``send`` may be called from any thread.
    """

    def __init__(
        self,
        local_port: int,
        peer_host: str = "127.0.0.1",
        peer_port: int = 0,
        bind_host: str = "127.0.0.1",
    ):
        self.peer = (peer_host, peer_port)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind((bind_host, local_port))
        except OSError:
            self._sock.close()
            raise
        self._sock.settimeout(0.1)
        self.local_port = self._sock.getsockname()[1]
        self._handler: Optional[Handler] = None
        self._on_idle: Optional[Callable[[], None]] = None
        self._thread: Optional[threading.Thread] = None
        self._closed = False
        self.dropped = 0

    def start(self, handler: Handler, on_idle: Optional[Callable[[], None]] = None) -> None:
        if self._thread is not None:
            raise RuntimeError("receive loop already started")
        self._handler = handler
        self._on_idle = on_idle
        self._thread = threading.Thread(target=self._run, name=f"osc-recv-{self.local_port}", daemon=True)
        self._thread.start()

    def _run(self) -> None:
        assert self._handler is not None
        while not self._closed:
            try:
                datagram, source = self._sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                if self._on_idle:
                    self._on_idle()
                continue
            except OSError:
                break
            try:
                messages = decode_flat(datagram)
            except OscDecodeError as exc:
                self.dropped += 1
                log.warning("dropped malformed datagram from %s: %s", source, exc)
                continue
            for message in messages:
                try:
                    self._handler(message, source)
                except Exception:
                    log.exception("OSC handler failed for %s", message.address)

    def send(self, message: OscMessage, to: Optional[tuple[str, int]] = None) -> None:
        if self._closed:
            raise OscTransportClosed("send on closed transport")
        destination = to or self.peer
        if not destination[1]:
            raise ValueError("no destination port")
        self._sock.sendto(encode(message), destination)

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        self._sock.close()

    def __enter__(self) -> "UdpTransport":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
