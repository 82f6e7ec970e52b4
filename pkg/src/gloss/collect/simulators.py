"""Device simulators standing in for the physical sensor servers: a
push-style microcontroller emitting bit-packed UDP frames, and a poll-style
gateway serving its sensor states as an XML document over HTTP."""

from __future__ import annotations

import logging
import random
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from xml.sax.saxutils import quoteattr

from .frames import encode_frame

log = logging.getLogger(__name__)


class _FlippingStates:
    """Shared random walk over n sensor bits."""

    def __init__(self, sensors: int, flip_prob: float, seed: int | None = None):
        self.rng = random.Random(seed)
        self.bits = [False] * sensors
        self.flip_prob = flip_prob
        self.lock = threading.Lock()

    def advance(self) -> list:
        with self.lock:
            self.bits = [
                (not b) if self.rng.random() < self.flip_prob else b for b in self.bits
            ]
            return list(self.bits)

    def snapshot(self) -> list:
        with self.lock:
            return list(self.bits)


class HCS12Simulator:
    """Pushes the full sensor state in a UDP frame every period."""

    def __init__(self, dest: tuple, sensors: int = 8, period_ms: int = 100,
                 flip_prob: float = 0.1, bind: tuple = ("127.0.0.1", 0),
                 seed: int | None = None):
        self.dest = dest
        self.period_ms = period_ms
        self.states = _FlippingStates(sensors, flip_prob, seed)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind(bind)
        self.source = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.frames_sent = 0

    def start(self):
        self._thread = threading.Thread(target=self._loop, name="hcs12-sim", daemon=True)
        self._thread.start()

    def _loop(self):
        while not self._stop.is_set():
            frame = encode_frame(self.states.advance())
            try:
                self._sock.sendto(frame, self.dest)
            except OSError:
                return
            self.frames_sent += 1
            self._stop.wait(self.period_ms / 1000.0)

    def stop(self):
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=2)
        self._sock.close()


class ILonSimulator:
    """Serves ``GET /state.xml`` with current sensor name/value pairs."""

    def __init__(self, sensor_names, flip_prob: float = 0.1,
                 host: str = "127.0.0.1", port: int = 0,
                 period_ms: int = 100, seed: int | None = None):
        self.names = list(sensor_names)
        self.states = _FlippingStates(len(self.names), flip_prob, seed)
        self.period_ms = period_ms
        sim = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                log.debug("ilon-sim: " + fmt, *args)

            def do_GET(self):
                if self.path not in ("/state.xml", "/state"):
                    self.send_response(404)
                    self.end_headers()
                    return
                body = sim.document().encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/xml")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self.host = host
        self.port = self._server.server_address[1]
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}/state.xml"

    def document(self) -> str:
        bits = self.states.snapshot()
        body = "".join(
            f"<s name={quoteattr(name)} value={quoteattr('1' if bit else '0')} />"
            for name, bit in zip(self.names, bits)
        )
        return f"<sensors>{body}</sensors>"

    def start(self):
        t = threading.Thread(target=self._server.serve_forever, name="ilon-sim", daemon=True)
        t.start()
        self._threads.append(t)
        f = threading.Thread(target=self._flip_loop, name="ilon-flips", daemon=True)
        f.start()
        self._threads.append(f)

    def _flip_loop(self):
        while not self._stop.is_set():
            self.states.advance()
            self._stop.wait(self.period_ms / 1000.0)

    def stop(self):
        self._stop.set()
        self._server.shutdown()
        self._server.server_close()
        for t in self._threads:
            t.join(timeout=2)
