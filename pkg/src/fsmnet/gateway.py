"""JSON-over-TCP event channel: envelope codec, listener and sender CLI.

Wire format, one UTF-8 JSON object per TCP connection::

    {"name": "infected", "value": true,
     "flow": {"switch": null, "inport": null, ..., "srcip": "10.0.0.1", ...}}

The sender half-closes its socket after writing; the listener replies with
``Ok`` or ``Error: <reason>`` and closes.
"""
from __future__ import annotations

import argparse
import json
import logging
import socket
import socketserver
import sys
import threading
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Union

from .packet import FIELDS, FlowError, FlowSpec, format_value, parse_flow_spec

log = logging.getLogger(__name__)

DEFAULT_ADDRESS = "127.0.0.1"
DEFAULT_PORT = 50001
MAX_ENVELOPE = 1 << 20

EventValue = Union[bool, str]


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    name: str
    value: EventValue
    flow: FlowSpec

    def __post_init__(self):
        if len(self.flow) == 0:
            raise EnvelopeError("event flow must bind at least one field")


def _wire_value(v: Any) -> Any:
    if v is None:
        return None
    if isinstance(v, int):
        return v
    return format_value(v)


def payload(flow: FlowSpec) -> dict:
    """All 13 header keys, unbound ones as None."""
    return {k: _wire_value(flow.get(k)) for k in FIELDS}


def encode(ev: Event) -> bytes:
    value = ev.value if isinstance(ev.value, bool) else str(ev.value)
    return json.dumps({"name": ev.name, "value": value, "flow": payload(ev.flow)}).encode("utf-8")


def decode(data: Union[bytes, str]) -> Event:
    try:
        obj = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise EnvelopeError(f"bad json: {exc}") from None
    if not isinstance(obj, dict) or set(obj) != {"name", "value", "flow"}:
        raise EnvelopeError("envelope needs exactly name, value, flow")
    name, value, flow = obj["name"], obj["value"], obj["flow"]
    if not isinstance(name, str) or not name:
        raise EnvelopeError("name must be a non-empty string")
    if not isinstance(value, (bool, str)):
        raise EnvelopeError("value must be a boolean or a string")
    if not isinstance(flow, dict) or set(flow) != set(FIELDS):
        raise EnvelopeError("flow payload must carry exactly the 13 header keys")
    try:
        spec = FlowSpec({k: v for k, v in flow.items() if v is not None})
    except FlowError as exc:
        raise EnvelopeError(str(exc)) from None
    return Event(name, value, spec)


def parse_value(text: str) -> EventValue:
    low = text.strip().lower()
    if low == "true":
        return True
    if low == "false":
        return False
    return text.strip()


def _recv_all(sock: socket.socket) -> bytes:
    chunks = []
    size = 0
    while True:
        chunk = sock.recv(65536)
        if not chunk:
            break
        chunks.append(chunk)
        size += len(chunk)
        if size > MAX_ENVELOPE:
            raise EnvelopeError("envelope too large")
    return b"".join(chunks)


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server: EventListener = self.server  # type: ignore[assignment]
        host, port = self.client_address[:2]
        server.emit(f"Received connection from ('{host}', {port})")
        try:
            data = _recv_all(self.request)
            ev = decode(data)
            with server.sink_lock:
                server.sink(ev)
            reply = "Ok"
        except Exception as exc:  # any rejection is reported to the sender
            reason = type(exc).__name__
            if str(exc):
                reason += f": {exc}"
            reply = f"Error: {reason}"
            log.debug("rejected event: %s", reply)
        try:
            self.request.sendall(reply.encode("utf-8"))
        except OSError:
            pass


class EventListener(socketserver.TCPServer):
    """Serial TCP listener: connections are handled one at a time, in accept order."""

    allow_reuse_address = True

    def __init__(self, address: str, port: int, sink: Callable[[Event], Any],
                 emit: Optional[Callable[[str], None]] = None):
        super().__init__((address, port), _Handler)
        self.sink = sink
        self.sink_lock = threading.Lock()
        self.emit = emit or (lambda line: log.info(line))
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> "EventListener":
        self._thread = threading.Thread(target=self.serve_forever, name="event-listener", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()


def serve(address: str, port: int, sink: Callable[[Event], Any],
          emit: Optional[Callable[[str], None]] = None) -> EventListener:
    """Bind and start a background listener; ``port=0`` picks a free port."""
    return EventListener(address, port, sink, emit).start()


def send_event(ev: Event, address: str = DEFAULT_ADDRESS, port: int = DEFAULT_PORT,
               timeout: float = 10.0) -> str:
    with socket.create_connection((address, port), timeout=timeout) as sock:
        sock.sendall(encode(ev))
        sock.shutdown(socket.SHUT_WR)
        return _recv_all(sock).decode("utf-8")


def _payload_text(flow: FlowSpec) -> str:
    return repr(payload(flow))


def build_sender_parser(prog: str = "json_sender") -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=prog, description="Send one event to the controller.")
    parser.add_argument("-n", "--event-name", dest="name", required=True)
    parser.add_argument("-l", "--event-value", dest="value", required=True)
    parser.add_argument("--flow", required=True, help='flow spec, e.g. "{srcip=10.0.0.1}"')
    parser.add_argument("-a", "--addr", default=DEFAULT_ADDRESS)
    parser.add_argument("-p", "--port", type=int, default=DEFAULT_PORT)
    return parser


def send_event_cli(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_sender_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 2)
    print(f"Flow_Str = {args.flow}", file=out)
    try:
        flow = parse_flow_spec(args.flow)
        ev = Event(args.name, parse_value(args.value), flow)
    except (FlowError, EnvelopeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"Data Payload = {_payload_text(flow)}", file=out)
    try:
        reply = send_event(ev, args.addr, args.port)
    except OSError as exc:
        print(f"error: cannot reach {args.addr}:{args.port}: {exc}", file=sys.stderr)
        return 1
    print(reply, file=out)
    return 0 if reply == "Ok" else 1


def main() -> None:
    sys.exit(send_event_cli())


__all__ = [
    "Event", "EnvelopeError", "EventListener", "decode", "encode", "payload",
    "parse_value", "send_event", "send_event_cli", "serve",
]
