"""Host-side networking: TCP frame ingest, the dashboard message-stream and
control endpoints (WebSocket), a static file server for the UI, and session
replay.

Endpoint map for `serve --ui-port P`:

    http://host:P/           dashboard static assets
    ws://host:P+1/stream     JSON messages {type: sample|event|health, ...}
    ws://host:P+1/control    JSON {type: annotate|trial_start|trial_stop, label}

Device timestamps are authoritative (`t_s`); every message also carries the
host arrival wall clock (`rx_ms`) for latency diagnostics.
"""

from __future__ import annotations

import http.server
import json
import logging
import socket
import threading
import time
from functools import partial
from pathlib import Path

from .padsim import Event
from .session import append_event, read_session
from .telemetry import (
    FrameDecoder,
    MSG_DATA,
    MSG_EVENT,
    Publisher,
    StreamHealth,
    encode_frame,
    frame_to_sample,
    health_message,
    sample_message,
)

log = logging.getLogger("innervsense.server")

RECV_CHUNK = 4096


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


class IngestClient:
    """Connects to a streaming device and publishes decoded traffic."""

    def __init__(self, addr: str, publisher: Publisher, raw_sink=None):
        self.addr = addr
        self.publisher = publisher
        self.health = StreamHealth()
        self.raw_sink = raw_sink  # file-like spool for the recorder
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def run(self):
        host, port = parse_addr(self.addr)
        decoder = FrameDecoder(self.health)
        with socket.create_connection((host, port)) as sock:
            sock.settimeout(0.5)
            while not self._stop.is_set():
                try:
                    chunk = sock.recv(RECV_CHUNK)
                except TimeoutError:
                    continue
                except OSError:
                    break
                if not chunk:
                    break
                if self.raw_sink is not None:
                    self.raw_sink.write(chunk)
                rx_ms = time.time() * 1000.0
                for frame in decoder.feed(chunk):
                    if frame.msg_type == MSG_DATA:
                        self.publisher.publish(("sample", frame_to_sample(frame), rx_ms))
                    elif frame.msg_type == MSG_EVENT:
                        self.publisher.publish(("event", frame, rx_ms))
        self.publisher.publish(("eof", None, time.time() * 1000.0))

    def start(self):
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


class SessionReplayer:
    """Streams a stored session's raw frames as if a device were live."""

    def __init__(self, session_dir, publisher: Publisher, pacing: str = "realtime"):
        self.session_dir = Path(session_dir)
        self.publisher = publisher
        self.pacing = pacing
        self.health = StreamHealth()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def run(self):
        session = read_session(self.session_dir)
        decoder = FrameDecoder(self.health)
        frames = decoder.feed(session.raw)
        start = time.monotonic()
        t0_us = next((f.timestamp_us for f in frames if f.msg_type == MSG_DATA), 0)
        for frame in frames:
            if self._stop.is_set():
                break
            if self.pacing == "realtime" and frame.msg_type == MSG_DATA:
                target = start + (frame.timestamp_us - t0_us) / 1e6
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            rx_ms = time.time() * 1000.0
            if frame.msg_type == MSG_DATA:
                self.publisher.publish(("sample", frame_to_sample(frame), rx_ms))
            elif frame.msg_type == MSG_EVENT:
                self.publisher.publish(("event", frame, rx_ms))
        self.publisher.publish(("eof", None, time.time() * 1000.0))

    def start(self):
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


def _event_text_label(frame) -> str:
    """Event frames carry either a JSON event record or a bare label."""
    try:
        rec = json.loads(frame.text)
        return rec.get("label", frame.text) if isinstance(rec, dict) else frame.text
    except json.JSONDecodeError:
        return frame.text


class DashboardServer:
    """WebSocket endpoints: /stream fans out samples, /control takes
    annotations and persists them to the session's event log."""

    def __init__(self, publisher: Publisher, port: int, session_dir=None,
                 health: StreamHealth | None = None, health_every: int = 50):
        self.publisher = publisher
        self.port = port
        self.session_dir = session_dir
        self.health = health
        self.health_every = health_every
        self._server = None
        self._thread: threading.Thread | None = None

    def _handle(self, ws):
        from websockets.exceptions import ConnectionClosed

        path = ws.request.path if ws.request else "/stream"
        if path.startswith("/control"):
            self._handle_control(ws, ConnectionClosed)
        else:
            self._handle_stream(ws, ConnectionClosed)

    def _handle_stream(self, ws, closed_exc):
        sub = self.publisher.subscribe()
        sent = 0
        try:
            while True:
                item = sub.get(timeout=1.0)
                if item is None:
                    if sub.closed:
                        break
                    continue
                kind, payload, rx_ms = item
                if kind == "sample":
                    ws.send(sample_message(payload, rx_ms))
                    sent += 1
                    if self.health is not None and sent % self.health_every == 0:
                        ws.send(health_message(self.health))
                elif kind == "event":
                    ws.send(json.dumps({
                        "type": "event",
                        "t_s": payload.timestamp_us / 1e6,
                        "label": _event_text_label(payload),
                        "rx_ms": rx_ms,
                    }))
                elif kind == "eof":
                    break
        except (closed_exc, OSError):
            pass
        finally:
            self.publisher.unsubscribe(sub)

    def _handle_control(self, ws, closed_exc):
        try:
            for raw in ws:
                try:
                    msg = json.loads(raw)
                    kind = msg.get("type")
                    if kind not in ("annotate", "trial_start", "trial_stop"):
                        ws.send(json.dumps({"type": "error", "error": f"unknown type {kind!r}"}))
                        continue
                    event = Event(
                        t_s=time.time(),
                        label=msg.get("label", kind),
                        payload={"control": kind, **msg.get("payload", {})},
                    )
                    if self.session_dir is not None:
                        append_event(self.session_dir, event)
                    ws.send(json.dumps({"type": "ack", "of": kind, "t_s": event.t_s,
                                        "label": event.label}))
                except json.JSONDecodeError:
                    ws.send(json.dumps({"type": "error", "error": "bad json"}))
        except (closed_exc, OSError):
            pass

    def start(self):
        from websockets.sync.server import serve

        self._server = serve(self._handle, "127.0.0.1", self.port)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        log.info("websocket endpoints on ws://127.0.0.1:%d/{stream,control}", self.port)

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


class _QuietHandler(http.server.SimpleHTTPRequestHandler):
    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)


def start_static_server(root, port: int):
    """Serve dashboard assets from root on port; returns (server, thread)."""
    handler = partial(_QuietHandler, directory=str(root))
    httpd = http.server.ThreadingHTTPServer(("127.0.0.1", port), handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    log.info("dashboard assets on http://127.0.0.1:%d/ from %s", port, root)
    return httpd, thread


def default_ui_root() -> Path:
    """frontend/dist if built, else a packaged placeholder page."""
    for candidate in (
        Path(__file__).resolve().parents[2] / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ):
        if (candidate / "index.html").exists():
            return candidate
    return Path(__file__).parent / "static"


class Recorder:
    """Spools raw bytes to a session directory while serving."""

    def __init__(self, out_dir, source: str):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.source = source
        self._raw = open(self.out_dir / "raw.bin", "wb")
        self.started_at = time.time()

    def write(self, chunk: bytes):
        self._raw.write(chunk)

    def finalize(self, health: StreamHealth | None = None):
        self._raw.close()
        manifest = {
            "id": self.out_dir.name,
            "created_at": time.strftime("%Y-%m-%dT%H:%M:%S+00:00", time.gmtime(self.started_at)),
            "schema_version": 1,
            "device": {"source": self.source},
        }
        if health is not None:
            manifest["stream_health"] = health.snapshot()
        (self.out_dir / "truth").mkdir(exist_ok=True)
        (self.out_dir / "derived").mkdir(exist_ok=True)
        if not (self.out_dir / "events.jsonl").exists():
            (self.out_dir / "events.jsonl").write_text("", encoding="utf-8")
        tmp = self.out_dir / "manifest.json.tmp"
        tmp.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        tmp.rename(self.out_dir / "manifest.json")


def record_stream(addr: str, out_dir, max_seconds: float | None = None) -> StreamHealth:
    """Connect to a device, spool every byte, decode for events, finalize."""
    recorder = Recorder(out_dir, addr)
    publisher = Publisher()
    sub = publisher.subscribe(queue_size=1 << 20)
    client = IngestClient(addr, publisher, raw_sink=recorder)
    client.start()
    deadline = time.monotonic() + max_seconds if max_seconds else None
    try:
        while True:
            item = sub.get(timeout=0.5)
            if item is not None:
                kind, payload, _ = item
                if kind == "eof":
                    break
                if kind == "event":
                    try:
                        rec = json.loads(payload.text)
                        event = Event(rec["t_s"], rec["label"], rec.get("payload", {}))
                    except (json.JSONDecodeError, KeyError, TypeError):
                        event = Event(payload.timestamp_us / 1e6, payload.text)
                    append_event(out_dir, event)
            if deadline is not None and time.monotonic() > deadline:
                break
    finally:
        client.stop()
        publisher.close()
        recorder.finalize(client.health)
    return client.health


def emulator_listen(frames, listen_addr: str, pacing: str = "realtime",
                    on_ready=None, accept_timeout: float = 30.0):
    """Bind, accept one connection, stream the frames, close.

    on_ready(host, port) fires once the socket is bound (port 0 picks an
    ephemeral port). Returns the emulation report (partial on peer hangup).
    """
    from .telemetry import emulate_device

    host, port = parse_addr(listen_addr)
    with socket.create_server((host, port)) as server:
        server.settimeout(accept_timeout)
        actual_port = server.getsockname()[1]
        log.info("device emulator listening on %s:%d", host, actual_port)
        if on_ready is not None:
            on_ready(host, actual_port)
        conn, peer = server.accept()
        log.info("streaming to %s", peer)
        with conn:
            sink = conn.makefile("wb")
            report = emulate_device(frames, sink, pacing=pacing)
            try:
                sink.close()
            except OSError:
                pass
    return report
