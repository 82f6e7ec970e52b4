"""The data-pull collector: listens for push-style UDP frames, polls
HTTP devices, aggregates readings second by second, and submits state
changes to the broker, buffering through outages.

One UDP listener dispatches datagrams to per-device handlers by source
ip:port; unrecognised sources are discarded and counted. One poll thread
runs per HTTP device. A single 1 Hz writer drains the shared sample
tables, applies the any-positive rule, and submits only changed sensors.
"""

from __future__ import annotations

import collections
import logging
import socket
import threading
import time
import urllib.error
import urllib.request
import xml.etree.ElementTree as ET
from xml.sax.saxutils import quoteattr

from .config import SensorConfig
from .frames import FrameError, StateTable, aggregate_second, decode_frame, diff, ilon_poll

log = logging.getLogger(__name__)


def submit_update(broker_url: str, changes) -> int:
    """POST a batch of (sensor, second, state) changes; returns the stored
    count from the broker's ack. Raises OSError-family errors on failure."""
    body = "<update>" + "".join(
        f"<s name={quoteattr(sensor)} value={quoteattr('1' if state else '0')} "
        f"t={quoteattr(str(second))} />"
        for sensor, second, state in changes
    ) + "</update>"
    req = urllib.request.Request(
        broker_url.rstrip("/") + "/update",
        data=body.encode("utf-8"),
        headers={"Content-Type": "application/xml"},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=10) as resp:
        ack = ET.fromstring(resp.read().decode("utf-8"))
    return int(ack.get("stored", "0"))


class _DeviceState:
    """Shared between a device's reader and the 1 Hz writer."""

    def __init__(self, device):
        self.device = device
        self.lock = threading.Lock()
        self.table: StateTable | None = None  # latest logical states
        self.samples: dict[str, list] = collections.defaultdict(list)

    def ingest(self, table: StateTable):
        with self.lock:
            if self.table is not None:
                changes = diff(self.table, table)
                if changes:
                    self.table.merge_changes(changes)
            else:
                self.table = table.copy()
            for name, state in table.states.items():
                self.samples[name].append(state)

    def drain_samples(self) -> dict:
        with self.lock:
            drained = {name: states for name, states in self.samples.items() if states}
            self.samples = collections.defaultdict(list)
            return drained


class DataPull:
    def __init__(self, config: SensorConfig, broker_url: str,
                 listen_host: str = "127.0.0.1", listen_port: int = 0,
                 poll_fetch=None):
        self.config = config
        self.broker_url = broker_url
        self.listen_host = listen_host
        self._requested_port = listen_port
        self.listen_port: int | None = None
        self._poll_fetch = poll_fetch or self._http_fetch
        self._devices = {d.name: _DeviceState(d) for d in config.devices}
        self._by_source = {
            (d.ip, d.port): self._devices[d.name] for d in config.udp_devices()
        }
        self.unknown_source_count = 0
        self.decode_error_count = 0
        self._last_written: dict[str, bool] = {}
        self._pending: collections.deque = collections.deque()  # buffered change batches
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._sock: socket.socket | None = None
        self.submitted = 0

    # -- lifecycle

    def start(self):
        if self.config.udp_devices():
            self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._sock.bind((self.listen_host, self._requested_port))
            self._sock.settimeout(0.2)
            self.listen_port = self._sock.getsockname()[1]
            self._spawn(self._udp_loop, "datapull-udp")
        for device in self.config.http_devices():
            self._spawn(lambda d=device: self._poll_loop(d), f"poll-{device.name}")
        self._spawn(self._writer_loop, "datapull-writer")

    def _spawn(self, target, name):
        t = threading.Thread(target=target, name=name, daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self, flush: bool = True):
        self._stop.set()
        for t in self._threads:
            t.join(timeout=3)
        if self._sock is not None:
            self._sock.close()
        if flush:
            self._write_tick(int(time.time()) + 1)
            self.flush_pending()

    # -- readers

    def _udp_loop(self):
        while not self._stop.is_set():
            try:
                data, source = self._sock.recvfrom(65536)
            except socket.timeout:
                continue
            except OSError:
                return
            state = self._by_source.get(source)
            if state is None:
                self.unknown_source_count += 1
                continue
            try:
                table = decode_frame(data, state.device.mapping)
            except FrameError:
                self.decode_error_count += 1
                continue
            state.ingest(table)

    def _http_fetch(self, address: str) -> str:
        with urllib.request.urlopen(address, timeout=5) as resp:
            return resp.read().decode("utf-8")

    def _poll_loop(self, device):
        state = self._devices[device.name]
        period = 1.0 / device.polls_per_sec
        prev = None
        while not self._stop.is_set():
            started = time.monotonic()
            try:
                text = self._poll_fetch(device.address)
                table = ilon_poll(text, device.mapping, prev)
                prev = table
                state.ingest(table)
            except Exception:
                log.debug("poll of %s failed", device.name, exc_info=True)
            delay = period - (time.monotonic() - started)
            if delay > 0:
                self._stop.wait(delay)

    # -- 1 Hz writer (sole submitter)

    def _writer_loop(self):
        while not self._stop.is_set():
            self._stop.wait(1.0)
            self._write_tick(int(time.time()))

    def _write_tick(self, second: int):
        batch = []
        for state in self._devices.values():
            drained = state.drain_samples()
            for sensor in sorted(state.device.mapping, key=lambda m: m.input_index):
                name = sensor.name
                prev = self._last_written.get(name, False)
                samples = drained.get(name, [])
                if not samples and name not in self._last_written:
                    continue  # never observed yet
                value = aggregate_second(samples, prev)
                if name not in self._last_written or value != prev:
                    batch.append((name, second, value))
                    self._last_written[name] = value
        if batch:
            self._pending.append(batch)
        self.flush_pending()

    def flush_pending(self) -> bool:
        """Submit buffered batches in order; stops at the first failure."""
        while self._pending:
            batch = self._pending[0]
            try:
                submit_update(self.broker_url, batch)
            except (urllib.error.URLError, OSError, ValueError):
                log.debug("broker unreachable; %d batches buffered", len(self._pending))
                return False
            self._pending.popleft()
            self.submitted += len(batch)
        return True

    @property
    def pending_batches(self) -> int:
        return len(self._pending)
