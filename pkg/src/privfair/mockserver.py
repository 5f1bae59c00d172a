"""Scripted chat-completion mock server for tests and offline runs.

The server replays a script of canned behaviours, one per request, then
falls back to a default.  Each script entry may set the reply content, an
HTTP status, a delay (to exercise timeouts and the in-flight cap) or
``drop`` to close the connection mid-request.  The handler records every
request payload and tracks the maximum number of simultaneous requests it
ever observed.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


@dataclass
class ScriptEntry:
    content: str | None = None
    status: int = 200
    delay: float = 0.0
    drop: bool = False
    raw_body: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptEntry":
        return cls(
            content=data.get("content"),
            status=int(data.get("status", 200)),
            delay=float(data.get("delay", 0.0)),
            drop=bool(data.get("drop", False)),
            raw_body=data.get("raw_body"),
        )


@dataclass
class ServerState:
    script: list[ScriptEntry] = field(default_factory=list)
    default: ScriptEntry = field(default_factory=lambda: ScriptEntry(content="{}"))
    requests: list[dict] = field(default_factory=list)
    in_flight: int = 0
    max_in_flight: int = 0
    served: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)

    def next_entry(self) -> ScriptEntry:
        with self.lock:
            index = self.served
            self.served += 1
        if index < len(self.script):
            return self.script[index]
        return self.default


class _Handler(BaseHTTPRequestHandler):
    state: ServerState  # attached by MockChatServer

    def log_message(self, *args):  # silence default stderr chatter
        pass

    def do_POST(self):
        state = self.state
        with state.lock:
            state.in_flight += 1
            state.max_in_flight = max(state.max_in_flight, state.in_flight)
        try:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            try:
                payload = json.loads(raw.decode("utf-8")) if raw else {}
            except json.JSONDecodeError:
                payload = {"_raw": raw.decode("utf-8", "replace")}
            with state.lock:
                state.requests.append(payload)

            entry = state.next_entry()
            if entry.delay > 0:
                time.sleep(entry.delay)
            if entry.drop:
                self.connection.close()
                return
            if entry.raw_body is not None:
                body = entry.raw_body.encode("utf-8")
            else:
                body = json.dumps(
                    {"choices": [{"message": {"content": entry.content or ""}}]}
                ).encode("utf-8")
            self.send_response(entry.status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        finally:
            with state.lock:
                state.in_flight -= 1


class MockChatServer:
    """Threaded mock endpoint; use as a context manager in tests."""

    def __init__(self, script=None, default_content: str = "{}", port: int = 0):
        entries = [
            e if isinstance(e, ScriptEntry) else ScriptEntry.from_dict(e)
            for e in (script or [])
        ]
        self.state = ServerState(script=entries, default=ScriptEntry(content=default_content))
        handler = type("BoundHandler", (_Handler,), {"state": self.state})
        self._server = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def start(self) -> "MockChatServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockChatServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


def load_script(path) -> list[ScriptEntry]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("mock server script must be a JSON list of entries")
    return [ScriptEntry.from_dict(entry) for entry in data]


def serve_forever(script_path=None, port: int = 8723) -> None:
    """Blocking entry point for the fixtures subcommand."""
    script = load_script(script_path) if script_path else []
    server = MockChatServer(script=script, port=port)
    print(f"mock chat server listening on {server.url}")
    server.start()
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        server.stop()
