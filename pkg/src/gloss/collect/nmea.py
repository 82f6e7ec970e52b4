"""GPS sentence handling: checksum validation, ddmm.mmmm to decimal
degrees, and forwarding fixes to a location server as wire events."""

from __future__ import annotations

import socket
import time

from .. import events as ev


class NmeaError(Exception):
    pass


class BadChecksum(NmeaError):
    pass


class UnsupportedSentence(NmeaError):
    pass


class VoidFix(NmeaError):
    pass


def nmea_checksum(body: str) -> int:
    """XOR of all characters between '$' and '*'."""
    checksum = 0
    for ch in body:
        checksum ^= ord(ch)
    return checksum


def _ddmm_to_degrees(value: str, hemisphere: str, degree_digits: int) -> float:
    if not value or not hemisphere:
        raise VoidFix("empty coordinate field")
    degrees = float(value[:degree_digits])
    minutes = float(value[degree_digits:])
    decimal = degrees + minutes / 60.0
    if hemisphere in ("S", "W"):
        decimal = -decimal
    elif hemisphere not in ("N", "E"):
        raise VoidFix(f"bad hemisphere {hemisphere!r}")
    return decimal


def parse_nmea(sentence: str) -> ev.GeoCoord:
    """Extract a coordinate from a GGA or RMC sentence.

    The checksum between '$' and '*' must verify; RMC status V (and GGA
    fix quality 0) report no usable fix."""
    sentence = sentence.strip()
    if not sentence.startswith("$"):
        raise UnsupportedSentence("sentence must start with '$'")
    if "*" not in sentence:
        raise BadChecksum("missing checksum")
    body, _, given = sentence[1:].rpartition("*")
    try:
        expected = int(given.strip(), 16)
    except ValueError:
        raise BadChecksum(f"unreadable checksum {given!r}") from None
    actual = nmea_checksum(body)
    if actual != expected:
        raise BadChecksum(f"checksum {actual:02X} != stated {given.strip().upper()}")

    fields = body.split(",")
    kind = fields[0][-3:] if fields[0] else ""
    if kind == "GGA":
        if len(fields) < 7:
            raise UnsupportedSentence("short GGA sentence")
        if fields[6] == "0":
            raise VoidFix("GGA reports no fix")
        lat = _ddmm_to_degrees(fields[2], fields[3], 2)
        lon = _ddmm_to_degrees(fields[4], fields[5], 3)
        return ev.GeoCoord(lat, lon)
    if kind == "RMC":
        if len(fields) < 7:
            raise UnsupportedSentence("short RMC sentence")
        if fields[2] == "V":
            raise VoidFix("RMC status V")
        lat = _ddmm_to_degrees(fields[3], fields[4], 2)
        lon = _ddmm_to_degrees(fields[5], fields[6], 3)
        return ev.GeoCoord(lat, lon)
    raise UnsupportedSentence(fields[0])


def feed_location(coord: ev.GeoCoord, user: str, endpoint: tuple,
                  observed_at: ev.Timestamp | None = None) -> None:
    """Wrap a fix into a location event and send it, LF-framed."""
    event = ev.LocationEvent(
        id=ev.UserId(user),
        observed_at=observed_at if observed_at is not None else ev.Timestamp.now(),
        where=coord,
    )
    with socket.create_connection(endpoint, timeout=10) as sock:
        sock.sendall((ev.serialize_event(event) + "\n").encode("utf-8"))


def replay_sentences(lines, user: str, endpoint: tuple, rate_hz: float = 1.0,
                     on_sent=None) -> int:
    """Feed a recorded NMEA stream at the given rate over one connection.
    Unusable sentences (bad checksum, void fix, unsupported kind) are
    skipped. Returns the number of events sent."""
    period = 1.0 / rate_hz if rate_hz > 0 else 0.0
    sent = 0
    with socket.create_connection(endpoint, timeout=10) as sock:
        for line in lines:
            line = line.strip()
            if not line:
                continue
            started = time.monotonic()
            try:
                coord = parse_nmea(line)
            except NmeaError:
                continue
            event = ev.LocationEvent(
                id=ev.UserId(user), observed_at=ev.Timestamp.now(), where=coord
            )
            sock.sendall((ev.serialize_event(event) + "\n").encode("utf-8"))
            sent += 1
            if on_sent:
                on_sent(event)
            if period > 0:
                remaining = period - (time.monotonic() - started)
                if remaining > 0:
                    time.sleep(remaining)
    return sent
