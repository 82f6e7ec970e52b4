"""HTTP request broker in front of the transition store.

Endpoints:

* ``POST /update`` -- body ``<update><s name="..." value="0|1" t="<epoch-s>"/>...</update>``;
  persists via the transition rule and answers ``<ack stored="n"/>``.
* ``GET /query?from=<epoch-s>&to=<epoch-s>`` -- XML list of records.
* ``GET /live`` -- streams each newly stored transition as one XML line.
"""

from __future__ import annotations

import logging
import queue
import threading
import urllib.parse
import xml.etree.ElementTree as ET
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from xml.sax.saxutils import quoteattr

from .store import BadRange, TimeRegression, TransitionRecord, TransitionStore

log = logging.getLogger(__name__)


def record_xml(r: TransitionRecord) -> str:
    return f"<r name={quoteattr(r.sensor)} t={quoteattr(str(r.second))} state={quoteattr('1' if r.state else '0')} />"


class Broker:
    def __init__(self, store: TransitionStore | None = None,
                 host: str = "127.0.0.1", port: int = 0):
        self.store = store if store is not None else TransitionStore()
        self._live_clients: set[queue.Queue] = set()
        self._live_lock = threading.Lock()
        broker = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):
                log.debug("broker: " + fmt, *args)

            def _reply(self, code: int, body: str, content_type="application/xml"):
                data = body.encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", content_type)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                if urllib.parse.urlparse(self.path).path != "/update":
                    self._reply(404, "<error>not found</error>")
                    return
                length = int(self.headers.get("Content-Length", "0"))
                body = self.rfile.read(length).decode("utf-8")
                try:
                    stored = broker.apply_update(body)
                except ValueError as exc:
                    self._reply(400, f"<error>{exc}</error>")
                    return
                self._reply(200, f'<ack stored="{stored}" />')

            def do_GET(self):
                url = urllib.parse.urlparse(self.path)
                if url.path == "/query":
                    params = urllib.parse.parse_qs(url.query)
                    try:
                        from_s = int(params.get("from", ["0"])[0])
                        to_s = int(params.get("to", ["0"])[0])
                        records = broker.store.query(from_s, to_s)
                    except (ValueError, BadRange) as exc:
                        self._reply(400, f"<error>{exc}</error>")
                        return
                    body = "<records>" + "".join(record_xml(r) for r in records) + "</records>"
                    self._reply(200, body)
                elif url.path == "/live":
                    self._stream_live()
                else:
                    self._reply(404, "<error>not found</error>")

            def _stream_live(self):
                q: queue.Queue = queue.Queue(maxsize=1000)
                with broker._live_lock:
                    broker._live_clients.add(q)
                try:
                    self.send_response(200)
                    self.send_header("Content-Type", "application/xml")
                    self.send_header("Connection", "close")
                    self.end_headers()
                    while True:
                        record = q.get()
                        self.wfile.write((record_xml(record) + "\n").encode("utf-8"))
                        self.wfile.flush()
                except OSError:
                    pass
                finally:
                    with broker._live_lock:
                        broker._live_clients.discard(q)

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True
        self.host = host
        self.port = self._server.server_address[1]
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def apply_update(self, body: str) -> int:
        try:
            root = ET.fromstring(body)
        except ET.ParseError as exc:
            raise ValueError(f"malformed update: {exc}") from exc
        if root.tag != "update":
            raise ValueError(f"expected <update>, got <{root.tag}>")
        stored = 0
        for el in root.findall("s"):
            name = el.get("name")
            value = el.get("value", "0")
            second = el.get("t")
            if name is None or second is None:
                raise ValueError("<s> requires name, value and t attributes")
            try:
                if self.store.record(name, int(second), value == "1"):
                    stored += 1
                    self._publish(TransitionRecord(name, int(second), value == "1"))
            except TimeRegression:
                log.warning("dropping out-of-order update for %s at %s", name, second)
        return stored

    def _publish(self, record: TransitionRecord):
        with self._live_lock:
            clients = list(self._live_clients)
        for q in clients:
            try:
                q.put_nowait(record)
            except queue.Full:
                pass

    def start(self):
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="broker", daemon=True
        )
        self._thread.start()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        self.store.close()


def parse_record_list(body: str) -> list:
    root = ET.fromstring(body)
    return [
        TransitionRecord(el.get("name"), int(el.get("t")), el.get("state") == "1")
        for el in root.findall("r")
    ]
