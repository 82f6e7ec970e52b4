"""Device frame codecs and state-table arithmetic.

A push-style device sends its complete sensor state in every datagram: a
version byte followed by bit-packed raw states, bit i of data byte j being
sensor input 8j+i (LSB first). Poll-style devices expose a small XML
document of name/value pairs instead. Both decode into a logical state
table, with per-sensor inversion flags applied on the way in.
"""

from __future__ import annotations

import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from ..events import NotWellFormed

FRAME_VERSION = 0x01
MAX_SENSORS = 50


class FrameError(Exception):
    pass


class LengthMismatch(FrameError):
    pass


class BadVersion(FrameError):
    pass


class SensorSetMismatch(FrameError):
    pass


@dataclass(frozen=True)
class MappedSensor:
    name: str
    input_index: int
    inverted: bool = False


@dataclass
class StateTable:
    """Logical (post-inversion) sensor states with last-change wall times."""

    states: dict = field(default_factory=dict)  # name -> bool
    changed_at: dict = field(default_factory=dict)  # name -> epoch seconds

    def copy(self) -> "StateTable":
        return StateTable(dict(self.states), dict(self.changed_at))

    def merge_changes(self, changes: dict, at: float | None = None) -> None:
        stamp = time.time() if at is None else at
        for name, state in changes.items():
            self.states[name] = state
            self.changed_at[name] = stamp


def _data_length(mapping) -> int:
    count = max(m.input_index for m in mapping) + 1
    return (count + 7) // 8


def encode_frame(raw_bits) -> bytes:
    """Pack ordered raw sensor states into a version-prefixed frame."""
    bits = list(raw_bits)
    if not 0 < len(bits) <= MAX_SENSORS:
        raise FrameError(f"sensor count must be 1..{MAX_SENSORS}, got {len(bits)}")
    data = bytearray((len(bits) + 7) // 8)
    for i, bit in enumerate(bits):
        if bit:
            data[i // 8] |= 1 << (i % 8)
    return bytes([FRAME_VERSION]) + bytes(data)


def decode_frame(frame: bytes, mapping) -> StateTable:
    """Unpack a frame against a device mapping, applying inversion flags."""
    if len(frame) < 1:
        raise LengthMismatch("empty frame")
    if frame[0] != FRAME_VERSION:
        raise BadVersion(f"expected version {FRAME_VERSION:#04x}, got {frame[0]:#04x}")
    data = frame[1:]
    expected = _data_length(mapping)
    if len(data) != expected:
        raise LengthMismatch(f"expected {expected} data bytes, got {len(data)}")
    table = StateTable()
    for m in mapping:
        raw = bool(data[m.input_index // 8] >> (m.input_index % 8) & 1)
        table.states[m.name] = raw ^ m.inverted
    return table


def raw_bits_for(mapping, raw_by_name: dict) -> list:
    """Helper for simulators: lay out named raw states by input index."""
    count = max(m.input_index for m in mapping) + 1
    bits = [False] * count
    for m in mapping:
        bits[m.input_index] = bool(raw_by_name.get(m.name, False))
    return bits


def ilon_poll(xml_text: str, mapping, prev: StateTable | None = None) -> StateTable:
    """Interpret one poll document (``<sensors><s name=... value=.../>``).

    Unmapped names are ignored; mapped sensors absent from the document
    keep their previous logical state (raw 0 before the first poll)."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from exc
    readings: dict[str, bool] = {}
    for el in root.findall("s"):
        name = el.get("name")
        value = el.get("value", "0").strip()
        if name is not None:
            readings[name] = value not in ("0", "", "false")
    table = StateTable()
    for m in mapping:
        if m.name in readings:
            table.states[m.name] = readings[m.name] ^ m.inverted
        elif prev is not None and m.name in prev.states:
            table.states[m.name] = prev.states[m.name]
        else:
            table.states[m.name] = bool(m.inverted)  # raw 0 default
    return table


def diff(prev: StateTable, cur: StateTable) -> dict:
    """Exactly the sensors whose logical state differs."""
    if set(prev.states) != set(cur.states):
        raise SensorSetMismatch(
            f"sensor sets differ: {sorted(set(prev.states) ^ set(cur.states))}"
        )
    return {
        name: cur.states[name]
        for name in sorted(cur.states)
        if cur.states[name] != prev.states[name]
    }


def aggregate_second(samples, prev: bool) -> bool:
    """Any positive reading within the second counts as active; an empty
    second carries the previous state forward."""
    samples = list(samples)
    if not samples:
        return bool(prev)
    return any(samples)
