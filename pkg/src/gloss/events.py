"""Message types and their XML wire form.

Eleven message kinds travel between clients and servers: location reports,
per-service activation requests, hearsay submissions/deliveries, radar and
trails responses, and map request/response pairs.  This module owns parsing,
serialization, well-formedness filtering and schema-level validation of all
of them.

Wire framing is line-delimited: one UTF-8 document per line, LF-terminated,
so serialization never emits interior newlines (newlines inside text content
are escaped as character references).
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from math import isfinite
from typing import Union


class EventError(Exception):
    """Base for all parse/validation failures in this module."""


class NotWellFormed(EventError):
    """Input is not a syntactically well-formed XML document."""


class UnknownRootElement(EventError):
    """Document root is not one of the known message kinds."""


class MissingField(EventError):
    """A mandatory child element is absent."""

    def __init__(self, name: str):
        super().__init__(f"missing field: {name}")
        self.name = name


class BadValue(EventError):
    """A field is present but its text cannot be interpreted."""

    def __init__(self, fieldname: str, reason: str):
        super().__init__(f"bad value for {fieldname}: {reason}")
        self.field = fieldname
        self.reason = reason


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class UserId:
    email: str

    def __str__(self) -> str:
        return self.email


@dataclass(frozen=True)
class GeoCoord:
    """Decimal-degree coordinate.

    ``lat_text``/``lon_text`` keep the lexical form the value was parsed
    from, so re-serialization reproduces e.g. trailing zeros byte-for-byte.
    They never participate in equality.
    """

    latitude: float
    longitude: float
    lat_text: str | None = field(default=None, compare=False, repr=False)
    lon_text: str | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True, order=True)
class Timestamp:
    """Calendar date + time of day, millisecond resolution, no timezone.

    Serializes as ``YYYY-MM-DDTHH:MM:SS:mmm`` (always zero-padded); parsing
    accepts 1-2 digit month/day/hour fields since observed wire data is not
    consistently padded.
    """

    dt: datetime

    _RX = re.compile(
        r"\s*(\d{1,4})-(\d{1,2})-(\d{1,2})"
        r"T(\d{1,2}):(\d{1,2}):(\d{1,2}):(\d{1,3})\s*$"
    )

    @classmethod
    def parse(cls, text: str) -> "Timestamp":
        m = cls._RX.match(text)
        if not m:
            raise ValueError(f"not a timestamp: {text!r}")
        y, mo, d, h, mi, s, ms = (int(g) for g in m.groups())
        return cls(datetime(y, mo, d, h, mi, s, ms * 1000))

    def isoformat(self) -> str:
        d = self.dt
        return (
            f"{d.year:04d}-{d.month:02d}-{d.day:02d}"
            f"T{d.hour:02d}:{d.minute:02d}:{d.second:02d}"
            f":{d.microsecond // 1000:03d}"
        )

    def add_ms(self, ms: int) -> "Timestamp":
        return Timestamp(self.dt + timedelta(milliseconds=ms))

    def epoch_seconds(self) -> float:
        return self.dt.timestamp()

    @classmethod
    def now(cls) -> "Timestamp":
        d = datetime.now()
        return cls(d.replace(microsecond=(d.microsecond // 1000) * 1000))


@dataclass(frozen=True)
class LocationEvent:
    id: UserId
    observed_at: Timestamp
    where: GeoCoord
    processing_sequence: str = ""


@dataclass(frozen=True)
class MapView:
    """Image metadata plus the geographic rectangle it depicts."""

    url: str
    image_width: int
    image_height: int
    top_left: GeoCoord
    bottom_right: GeoCoord
    width_ratio: float = 1.0
    height_ratio: float = 1.0
    zoom: int = 0

    @classmethod
    def checked(cls, **kwargs) -> "MapView":
        """Construct and reject views violating the corner invariants."""
        view = cls(**kwargs)
        problems = _validate_map_view(view, "")
        if problems:
            raise ValueError("; ".join(problems))
        return view


@dataclass(frozen=True)
class HearsayRequest:
    id: UserId
    activate: bool


@dataclass(frozen=True)
class HearsaySubmission:
    sender: LocationEvent
    receiver: LocationEvent
    message: str


@dataclass(frozen=True)
class HearsayDelivery:
    target: UserId
    sender: LocationEvent
    receiver: LocationEvent
    message: str


@dataclass(frozen=True)
class RadarRequest:
    id: UserId
    activate: bool


@dataclass(frozen=True)
class RadarResponse:
    target: UserId
    location: LocationEvent


@dataclass(frozen=True)
class TrailRequest:
    id: UserId
    activate: bool
    desired_users: tuple[UserId, ...] = ()


@dataclass(frozen=True)
class TrailSubmission:
    trail: tuple[LocationEvent, ...]


@dataclass(frozen=True)
class TrailsResponse:
    target: UserId
    trail: tuple[LocationEvent, ...]


@dataclass(frozen=True)
class MapRequest:
    id: UserId
    coord: GeoCoord
    zoom: int


@dataclass(frozen=True)
class MapResponse:
    target: UserId
    view: MapView


Event = Union[
    LocationEvent,
    HearsayRequest,
    HearsaySubmission,
    HearsayDelivery,
    RadarRequest,
    RadarResponse,
    TrailRequest,
    TrailSubmission,
    TrailsResponse,
    MapRequest,
    MapResponse,
]

_KIND_BY_TYPE = {
    LocationEvent: "locationEvent",
    HearsayRequest: "hearsayRequest",
    HearsaySubmission: "hearsaySubmission",
    HearsayDelivery: "hearsayDelivery",
    RadarRequest: "radarRequest",
    RadarResponse: "radarResponse",
    TrailRequest: "trailRequest",
    TrailSubmission: "trailSubmission",
    TrailsResponse: "trailsResponse",
    MapRequest: "mapRequest",
    MapResponse: "mapResponse",
}

EVENT_KINDS = tuple(_KIND_BY_TYPE.values())


def event_kind(e: Event) -> str:
    """The wire tag of an event, e.g. ``radarRequest``."""
    return _KIND_BY_TYPE[type(e)]


def principal_id(e: Event) -> UserId:
    """The user a message speaks for: its ID element, or the sender's."""
    if isinstance(e, (LocationEvent, HearsayRequest, RadarRequest, TrailRequest, MapRequest)):
        return e.id
    if isinstance(e, HearsaySubmission):
        return e.sender.id
    if isinstance(e, TrailSubmission):
        return e.trail[0].id
    if isinstance(e, (HearsayDelivery, RadarResponse, TrailsResponse, MapResponse)):
        return e.target
    raise TypeError(f"not an event: {e!r}")


def target_id(e: Event) -> UserId | None:
    """The user a server-generated message is addressed to, if any."""
    if isinstance(e, (HearsayDelivery, RadarResponse, TrailsResponse, MapResponse)):
        return e.target
    return None


# ---------------------------------------------------------------------------
# Parsing


def is_well_formed(s: str) -> bool:
    """True iff ``s`` is one syntactically well-formed XML document."""
    try:
        ET.fromstring(s)
        return True
    except ET.ParseError:
        return False
    except ValueError:
        return False


def parse_event(xml_text: str) -> Event:
    """Parse one XML document into its typed event.

    Unknown sibling elements are ignored; whitespace between elements is
    insignificant.  Raises :class:`NotWellFormed`, :class:`UnknownRootElement`,
    :class:`MissingField` or :class:`BadValue`.
    """
    try:
        root = ET.fromstring(xml_text)
    except (ET.ParseError, ValueError) as exc:
        raise NotWellFormed(str(exc)) from exc
    parser = _PARSERS.get(root.tag)
    if parser is None:
        raise UnknownRootElement(root.tag)
    return parser(root)


def _child(el: ET.Element, name: str, path: str) -> ET.Element:
    found = el.find(name)
    if found is None:
        raise MissingField(f"{path}{name}")
    return found


def _text(el: ET.Element) -> str:
    return (el.text or "").strip()


def _parse_user_id(el: ET.Element, path: str) -> UserId:
    email = _child(el, "email", path + "ID/")
    return UserId(_text(email))


def _parse_float(el: ET.Element, path: str) -> tuple[float, str]:
    raw = _text(el)
    try:
        return float(raw), raw
    except ValueError as exc:
        raise BadValue(path, f"not a number: {raw!r}") from exc


def _parse_int(el: ET.Element, path: str) -> int:
    raw = _text(el)
    try:
        return int(raw)
    except ValueError as exc:
        raise BadValue(path, f"not an integer: {raw!r}") from exc


def _parse_bool(el: ET.Element, path: str) -> bool:
    raw = _text(el).lower()
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise BadValue(path, f"not a boolean: {raw!r}")


def _parse_lat_long(el: ET.Element, path: str) -> GeoCoord:
    lat_el = _child(el, "latitude", path)
    lon_el = _child(el, "longitude", path)
    lat, lat_raw = _parse_float(lat_el, path + "latitude")
    lon, lon_raw = _parse_float(lon_el, path + "longitude")
    return GeoCoord(lat, lon, lat_text=lat_raw, lon_text=lon_raw)


def _parse_location_event(el: ET.Element, path: str = "locationEvent/") -> LocationEvent:
    uid = _parse_user_id(_child(el, "ID", path), path)
    seq_el = el.find("processingSequence")
    seq = "" if seq_el is None else (seq_el.text or "")
    obs = _child(el, "observation", path)
    when_el = _child(obs, "timeOfObservation", path + "observation/")
    try:
        when = Timestamp.parse(_text(when_el))
    except ValueError as exc:
        raise BadValue(path + "observation/timeOfObservation", str(exc)) from exc
    where = _child(obs, "where", path + "observation/")
    phys = _child(where, "physicalLocation", path + "observation/where/")
    coord = _child(phys, "coordinate", path + "observation/where/physicalLocation/")
    ll = _child(coord, "latLongCoordinate", path + "observation/where/physicalLocation/coordinate/")
    return LocationEvent(
        id=uid,
        observed_at=when,
        where=_parse_lat_long(ll, path + ".../latLongCoordinate/"),
        processing_sequence=seq,
    )


def _parse_activation(root: ET.Element, kind: str) -> tuple[UserId, bool]:
    uid = _parse_user_id(_child(root, "ID", kind + "/"), kind + "/")
    act = _parse_bool(_child(root, "activate", kind + "/"), kind + "/activate")
    return uid, act


def _p_location(root: ET.Element) -> LocationEvent:
    return _parse_location_event(root)


def _p_hearsay_request(root: ET.Element) -> HearsayRequest:
    uid, act = _parse_activation(root, "hearsayRequest")
    return HearsayRequest(uid, act)


def _p_hearsay_submission(root: ET.Element) -> HearsaySubmission:
    sender = _parse_location_event(
        _child(_child(root, "sender", "hearsaySubmission/"), "locationEvent", "sender/"),
        "sender/locationEvent/",
    )
    receiver = _parse_location_event(
        _child(_child(root, "receiver", "hearsaySubmission/"), "locationEvent", "receiver/"),
        "receiver/locationEvent/",
    )
    msg_el = _child(root, "hearsayMessage", "hearsaySubmission/")
    return HearsaySubmission(sender, receiver, msg_el.text or "")


def _p_hearsay_delivery(root: ET.Element) -> HearsayDelivery:
    target = _parse_user_id(_child(root, "ID", "hearsayDelivery/"), "hearsayDelivery/")
    sender = _parse_location_event(
        _child(_child(root, "sender", "hearsayDelivery/"), "locationEvent", "sender/"),
        "sender/locationEvent/",
    )
    receiver = _parse_location_event(
        _child(_child(root, "receiver", "hearsayDelivery/"), "locationEvent", "receiver/"),
        "receiver/locationEvent/",
    )
    msg_el = _child(root, "hearsayMessage", "hearsayDelivery/")
    return HearsayDelivery(target, sender, receiver, msg_el.text or "")


def _p_radar_request(root: ET.Element) -> RadarRequest:
    uid, act = _parse_activation(root, "radarRequest")
    return RadarRequest(uid, act)


def _p_radar_response(root: ET.Element) -> RadarResponse:
    target = _parse_user_id(_child(root, "ID", "radarResponse/"), "radarResponse/")
    loc = _parse_location_event(_child(root, "locationEvent", "radarResponse/"))
    return RadarResponse(target, loc)


def _p_trail_request(root: ET.Element) -> TrailRequest:
    uid, act = _parse_activation(root, "trailRequest")
    desired: list[UserId] = []
    du = root.find("desiredUsers")
    if du is not None:
        for id_el in du.findall("ID"):
            desired.append(_parse_user_id(id_el, "trailRequest/desiredUsers/"))
    return TrailRequest(uid, act, tuple(desired))


def _parse_trail(root: ET.Element, kind: str) -> tuple[LocationEvent, ...]:
    trail_el = _child(root, "trail", kind + "/")
    observed = _child(trail_el, "observedTrail", kind + "/trail/")
    points = [
        _parse_location_event(le, kind + "/trail/observedTrail/locationEvent/")
        for le in observed.findall("locationEvent")
    ]
    if not points:
        raise MissingField(kind + "/trail/observedTrail/locationEvent")
    return tuple(points)


def _p_trail_submission(root: ET.Element) -> TrailSubmission:
    return TrailSubmission(_parse_trail(root, "trailSubmission"))


def _p_trails_response(root: ET.Element) -> TrailsResponse:
    target = _parse_user_id(_child(root, "ID", "trailsResponse/"), "trailsResponse/")
    return TrailsResponse(target, _parse_trail(root, "trailsResponse"))


def _p_map_request(root: ET.Element) -> MapRequest:
    uid = _parse_user_id(_child(root, "ID", "mapRequest/"), "mapRequest/")
    coord_el = _child(root, "coordinate", "mapRequest/")
    ll = _child(coord_el, "latLongCoordinate", "mapRequest/coordinate/")
    coord = _parse_lat_long(ll, "mapRequest/coordinate/latLongCoordinate/")
    zoom = _parse_int(_child(root, "zoom", "mapRequest/"), "mapRequest/zoom")
    return MapRequest(uid, coord, zoom)


def _parse_corner(el: ET.Element, path: str) -> GeoCoord:
    lat_el = _child(el, "latitude", path)
    lon_el = _child(el, "longitude", path)
    lat, lat_raw = _parse_float(lat_el, path + "latitude")
    lon, lon_raw = _parse_float(lon_el, path + "longitude")
    return GeoCoord(lat, lon, lat_text=lat_raw, lon_text=lon_raw)


def _p_map_response(root: ET.Element) -> MapResponse:
    target = _parse_user_id(_child(root, "ID", "mapResponse/"), "mapResponse/")
    image = _child(root, "image", "mapResponse/")
    url = _text(_child(image, "url", "mapResponse/image/"))
    width = _parse_int(_child(image, "imageWidth", "mapResponse/image/"), "mapResponse/image/imageWidth")
    height = _parse_int(_child(image, "imageHeight", "mapResponse/image/"), "mapResponse/image/imageHeight")
    corners = _child(image, "corners", "mapResponse/image/")
    tl = _parse_corner(_child(corners, "topLeft", "corners/"), "corners/topLeft/")
    br = _parse_corner(_child(corners, "bottomRight", "corners/"), "corners/bottomRight/")
    ratio = _child(image, "ratio", "mapResponse/image/")
    wr, _ = _parse_float(_child(ratio, "widthRatio", "ratio/"), "ratio/widthRatio")
    hr, _ = _parse_float(_child(ratio, "heightRatio", "ratio/"), "ratio/heightRatio")
    zoom = _parse_int(_child(image, "zoom", "mapResponse/image/"), "mapResponse/image/zoom")
    view = MapView(
        url=url,
        image_width=width,
        image_height=height,
        top_left=tl,
        bottom_right=br,
        width_ratio=wr,
        height_ratio=hr,
        zoom=zoom,
    )
    return MapResponse(target, view)


_PARSERS = {
    "locationEvent": _p_location,
    "hearsayRequest": _p_hearsay_request,
    "hearsaySubmission": _p_hearsay_submission,
    "hearsayDelivery": _p_hearsay_delivery,
    "radarRequest": _p_radar_request,
    "radarResponse": _p_radar_response,
    "trailRequest": _p_trail_request,
    "trailSubmission": _p_trail_submission,
    "trailsResponse": _p_trails_response,
    "mapRequest": _p_map_request,
    "mapResponse": _p_map_response,
}


# ---------------------------------------------------------------------------
# Serialization

_ESCAPES = [
    ("&", "&amp;"),
    ("<", "&lt;"),
    (">", "&gt;"),
    ("\r", "&#13;"),
    ("\n", "&#10;"),
]


def _esc(s: str) -> str:
    # Newlines become character references so the wire form stays one line.
    for ch, ref in _ESCAPES:
        s = s.replace(ch, ref)
    return s


def _fmt_num(value: float, text: str | None) -> str:
    """Prefer the lexical form the value was parsed from, when still exact."""
    if text is not None:
        try:
            if float(text) == value:
                return _esc(text.strip())
        except ValueError:
            pass
    return repr(value)


def _xml_id(uid: UserId) -> str:
    return f"<ID><email>{_esc(uid.email)}</email></ID>"


def _xml_lat_long(c: GeoCoord) -> str:
    return (
        f"<latitude>{_fmt_num(c.latitude, c.lat_text)}</latitude>"
        f"<longitude>{_fmt_num(c.longitude, c.lon_text)}</longitude>"
    )


def _xml_location(e: LocationEvent, tag: str = "locationEvent") -> str:
    seq = (
        "<processingSequence />"
        if not e.processing_sequence
        else f"<processingSequence>{_esc(e.processing_sequence)}</processingSequence>"
    )
    return (
        f"<{tag}>{_xml_id(e.id)}{seq}<observation>"
        f"<timeOfObservation>{e.observed_at.isoformat()}</timeOfObservation>"
        f"<where><physicalLocation><coordinate><latLongCoordinate>"
        f"{_xml_lat_long(e.where)}"
        f"</latLongCoordinate></coordinate></physicalLocation></where>"
        f"</observation></{tag}>"
    )


def _xml_trail(points: tuple[LocationEvent, ...]) -> str:
    body = "".join(_xml_location(p) for p in points)
    return f"<trail><observedTrail>{body}</observedTrail></trail>"


def _xml_bool(b: bool) -> str:
    return "true" if b else "false"


def _ratio_text(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(v)


def serialize_event(e: Event) -> str:
    """Serialize to one XML document with no interior newlines.

    ``parse_event(serialize_event(e))`` is field-equal to ``e`` for any
    event satisfying its type invariants.
    """
    if isinstance(e, LocationEvent):
        return _xml_location(e)
    if isinstance(e, HearsayRequest):
        return (
            f"<hearsayRequest>{_xml_id(e.id)}"
            f"<activate>{_xml_bool(e.activate)}</activate></hearsayRequest>"
        )
    if isinstance(e, HearsaySubmission):
        return (
            f"<hearsaySubmission><sender>{_xml_location(e.sender)}</sender>"
            f"<receiver>{_xml_location(e.receiver)}</receiver>"
            f"<hearsayMessage>{_esc(e.message)}</hearsayMessage></hearsaySubmission>"
        )
    if isinstance(e, HearsayDelivery):
        return (
            f"<hearsayDelivery>{_xml_id(e.target)}"
            f"<sender>{_xml_location(e.sender)}</sender>"
            f"<receiver>{_xml_location(e.receiver)}</receiver>"
            f"<hearsayMessage>{_esc(e.message)}</hearsayMessage></hearsayDelivery>"
        )
    if isinstance(e, RadarRequest):
        return (
            f"<radarRequest>{_xml_id(e.id)}"
            f"<activate>{_xml_bool(e.activate)}</activate></radarRequest>"
        )
    if isinstance(e, RadarResponse):
        return f"<radarResponse>{_xml_id(e.target)}{_xml_location(e.location)}</radarResponse>"
    if isinstance(e, TrailRequest):
        desired = ""
        if e.desired_users:
            ids = "".join(_xml_id(u) for u in e.desired_users)
            desired = f"<desiredUsers>{ids}</desiredUsers>"
        return (
            f"<trailRequest>{_xml_id(e.id)}"
            f"<activate>{_xml_bool(e.activate)}</activate>{desired}</trailRequest>"
        )
    if isinstance(e, TrailSubmission):
        return f"<trailSubmission>{_xml_trail(e.trail)}</trailSubmission>"
    if isinstance(e, TrailsResponse):
        return f"<trailsResponse>{_xml_id(e.target)}{_xml_trail(e.trail)}</trailsResponse>"
    if isinstance(e, MapRequest):
        return (
            f"<mapRequest>{_xml_id(e.id)}"
            f"<coordinate><latLongCoordinate>{_xml_lat_long(e.coord)}"
            f"</latLongCoordinate></coordinate>"
            f"<zoom>{e.zoom}</zoom></mapRequest>"
        )
    if isinstance(e, MapResponse):
        v = e.view
        return (
            f"<mapResponse>{_xml_id(e.target)}<image>"
            f"<url>{_esc(v.url)}</url>"
            f"<imageWidth>{v.image_width}</imageWidth>"
            f"<imageHeight>{v.image_height}</imageHeight>"
            f"<corners><topLeft>{_xml_lat_long(v.top_left)}</topLeft>"
            f"<bottomRight>{_xml_lat_long(v.bottom_right)}</bottomRight></corners>"
            f"<ratio><widthRatio>{_ratio_text(v.width_ratio)}</widthRatio>"
            f"<heightRatio>{_ratio_text(v.height_ratio)}</heightRatio></ratio>"
            f"<zoom>{v.zoom}</zoom>"
            f"</image></mapResponse>"
        )
    raise TypeError(f"not an event: {e!r}")


# ---------------------------------------------------------------------------
# Validation


def _validate_user_id(uid: UserId, path: str) -> list[str]:
    out = []
    if not uid.email:
        out.append(f"{path}email: must be non-empty")
    elif uid.email.count("@") != 1:
        out.append(f"{path}email: must contain exactly one '@'")
    return out


def _validate_coord(c: GeoCoord, path: str) -> list[str]:
    out = []
    if not isfinite(c.latitude):
        out.append(f"{path}latitude: must be finite")
    elif not -90.0 <= c.latitude <= 90.0:
        out.append(f"{path}latitude: must be within [-90, 90]")
    if not isfinite(c.longitude):
        out.append(f"{path}longitude: must be finite")
    elif not -180.0 <= c.longitude <= 180.0:
        out.append(f"{path}longitude: must be within [-180, 180]")
    return out


def _validate_location(e: LocationEvent, path: str) -> list[str]:
    return _validate_user_id(e.id, path + "ID/") + _validate_coord(e.where, path + "where/")


def _validate_map_view(v: MapView, path: str) -> list[str]:
    out = []
    out += _validate_coord(v.top_left, path + "corners/topLeft/")
    out += _validate_coord(v.bottom_right, path + "corners/bottomRight/")
    if v.image_width <= 0:
        out.append(f"{path}imageWidth: must be > 0")
    if v.image_height <= 0:
        out.append(f"{path}imageHeight: must be > 0")
    if not v.top_left.latitude > v.bottom_right.latitude:
        out.append(f"{path}corners: top-left latitude must exceed bottom-right latitude")
    if not v.top_left.longitude < v.bottom_right.longitude:
        out.append(f"{path}corners: top-left longitude must be west of bottom-right longitude")
    if not (isfinite(v.width_ratio) and v.width_ratio > 0):
        out.append(f"{path}widthRatio: must be > 0")
    if not (isfinite(v.height_ratio) and v.height_ratio > 0):
        out.append(f"{path}heightRatio: must be > 0")
    if v.zoom < 0:
        out.append(f"{path}zoom: must be >= 0")
    return out


def validate(e: Event) -> list[str]:
    """All invariant violations of the event's variant; empty when valid."""
    if isinstance(e, LocationEvent):
        return _validate_location(e, "")
    if isinstance(e, (HearsayRequest, RadarRequest)):
        return _validate_user_id(e.id, "ID/")
    if isinstance(e, HearsaySubmission):
        return _validate_location(e.sender, "sender/") + _validate_location(e.receiver, "receiver/")
    if isinstance(e, HearsayDelivery):
        return (
            _validate_user_id(e.target, "ID/")
            + _validate_location(e.sender, "sender/")
            + _validate_location(e.receiver, "receiver/")
        )
    if isinstance(e, RadarResponse):
        return _validate_user_id(e.target, "ID/") + _validate_location(e.location, "locationEvent/")
    if isinstance(e, TrailRequest):
        out = _validate_user_id(e.id, "ID/")
        for i, u in enumerate(e.desired_users):
            out += _validate_user_id(u, f"desiredUsers/ID[{i}]/")
        return out
    if isinstance(e, TrailSubmission):
        out = [] if e.trail else ["trail: must contain at least one locationEvent"]
        for i, p in enumerate(e.trail):
            out += _validate_location(p, f"trail[{i}]/")
        return out
    if isinstance(e, TrailsResponse):
        out = _validate_user_id(e.target, "ID/")
        if not e.trail:
            out.append("trail: must contain at least one locationEvent")
        for i, p in enumerate(e.trail):
            out += _validate_location(p, f"trail[{i}]/")
        return out
    if isinstance(e, MapRequest):
        out = _validate_user_id(e.id, "ID/") + _validate_coord(e.coord, "coordinate/")
        if e.zoom < 0:
            out.append("zoom: must be >= 0")
        return out
    if isinstance(e, MapResponse):
        return _validate_user_id(e.target, "ID/") + _validate_map_view(e.view, "image/")
    raise TypeError(f"not an event: {e!r}")
