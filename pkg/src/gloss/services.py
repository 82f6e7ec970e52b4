"""Server-side service logic: map, hearsay, radar and trails handling,
per-user view caching, origin authentication, and ID-filtered delivery.

The pure handlers (``handle_map`` etc.) hold the business rules and are
unit-testable in isolation; the ``*Module`` component classes wrap them for
use inside a server assembly, each owning its own state and fed by the
assembly's fan-out buses. A map response doubles as the "view changed"
signal that triggers hearsay/trails redelivery, so it is fanned to every
module before it is delivered to the requesting client.
"""

from __future__ import annotations

import logging
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from . import events as ev
from . import geo
from .events import (
    Event,
    GeoCoord,
    HearsayDelivery,
    HearsayRequest,
    HearsaySubmission,
    LocationEvent,
    MapRequest,
    MapResponse,
    MapView,
    NotWellFormed,
    RadarRequest,
    RadarResponse,
    TrailRequest,
    TrailsResponse,
    TrailSubmission,
    UserId,
)
from .pipeline import (
    ANY_PORT,
    AssemblySpec,
    Component,
    ComponentSpec,
    Connection,
    ConnectionTable,
    Export,
    Message,
    register_component_type,
)

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# State containers


class ViewCache:
    """Latest map view per user (the user-map-buffer contents)."""

    def __init__(self):
        self._views: dict[UserId, MapView] = {}

    def put(self, user: UserId, view: MapView) -> None:
        self._views[user] = view

    def get(self, user: UserId) -> MapView | None:
        return self._views.get(user)

    def __len__(self) -> int:
        return len(self._views)

    def users(self) -> tuple:
        return tuple(self._views)


class ServiceFlags:
    """Per-user activation state; everything defaults to inactive."""

    def __init__(self):
        self.radar: dict[UserId, bool] = {}
        self.hearsay: dict[UserId, bool] = {}
        self.trails: dict[UserId, bool] = {}
        self.trails_filter: dict[UserId, frozenset] = {}

    def radar_active(self, u: UserId) -> bool:
        return self.radar.get(u, False)

    def hearsay_active(self, u: UserId) -> bool:
        return self.hearsay.get(u, False)

    def trails_active(self, u: UserId) -> bool:
        return self.trails.get(u, False)

    def wants_trail_from(self, viewer: UserId, owner: UserId) -> bool:
        chosen = self.trails_filter.get(viewer, frozenset())
        return not chosen or owner in chosen


@dataclass(frozen=True)
class StoredDelivery:
    target: UserId
    delivery_location: GeoCoord
    delivery: HearsayDelivery


class HearsayStore:
    """Append-only record of generated hearsay deliveries."""

    def __init__(self):
        self.deliveries: list[StoredDelivery] = []

    def append(self, delivery: HearsayDelivery) -> StoredDelivery:
        stored = StoredDelivery(delivery.target, delivery.receiver.where, delivery)
        self.deliveries.append(stored)
        return stored

    def __len__(self) -> int:
        return len(self.deliveries)


@dataclass(frozen=True)
class StoredTrail:
    owner: UserId
    points: tuple


class TrailStore:
    def __init__(self):
        self.trails: list[StoredTrail] = []

    def append(self, points: tuple) -> StoredTrail:
        stored = StoredTrail(points[0].id, tuple(points))
        self.trails.append(stored)
        return stored

    def __len__(self) -> int:
        return len(self.trails)


class SessionRegistry:
    """User -> live connection tag; later registrations replace earlier ones.
    Shared between the socket layer and the event server, hence locked."""

    def __init__(self):
        self._tags: dict[UserId, str] = {}
        self._lock = threading.Lock()

    def register(self, user: UserId, tag: str) -> None:
        with self._lock:
            self._tags[user] = tag

    def tag_for(self, user: UserId) -> str | None:
        with self._lock:
            return self._tags.get(user)

    def unregister(self, user: UserId) -> None:
        with self._lock:
            self._tags.pop(user, None)

    def drop_tag(self, tag: str) -> None:
        with self._lock:
            for user in [u for u, t in self._tags.items() if t == tag]:
                del self._tags[user]

    def users(self) -> tuple:
        with self._lock:
            return tuple(self._tags)


def register_session(registry: SessionRegistry, user: UserId, tag: str) -> None:
    registry.register(user, tag)


# ---------------------------------------------------------------------------
# Map catalog


class MapCatalog:
    """The set of known map images, loaded once at startup."""

    def __init__(self, entries: list):
        self.entries: list[MapView] = list(entries)

    @staticmethod
    def _area(v: MapView) -> float:
        return (v.top_left.latitude - v.bottom_right.latitude) * (
            v.bottom_right.longitude - v.top_left.longitude
        )

    def select(self, coord: GeoCoord, zoom: int) -> MapView | None:
        """Smallest-area entry containing the coordinate at the zoom level;
        ties break on URL for determinism."""
        candidates = [
            v for v in self.entries if v.zoom == zoom and geo.contains(v, coord)
        ]
        if not candidates:
            return None
        return min(candidates, key=lambda v: (self._area(v), v.url))


def parse_map_catalog(xml_text: str) -> MapCatalog:
    """Parse a ``<mapCatalog>`` document of ``<map>`` entries."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise NotWellFormed(str(exc)) from exc
    if root.tag != "mapCatalog":
        raise ev.UnknownRootElement(root.tag)
    entries = []
    for map_el in root.findall("map"):
        url = ev._text(ev._child(map_el, "url", "map/"))
        width = ev._parse_int(ev._child(map_el, "imageWidth", "map/"), "map/imageWidth")
        height = ev._parse_int(ev._child(map_el, "imageHeight", "map/"), "map/imageHeight")
        corners = ev._child(map_el, "corners", "map/")
        tl = ev._parse_corner(ev._child(corners, "topLeft", "map/corners/"), "map/corners/topLeft/")
        br = ev._parse_corner(
            ev._child(corners, "bottomRight", "map/corners/"), "map/corners/bottomRight/"
        )
        ratio_el = map_el.find("ratio")
        wr = hr = 1.0
        if ratio_el is not None:
            wr_el = ratio_el.find("widthRatio")
            hr_el = ratio_el.find("heightRatio")
            if wr_el is not None:
                wr, _ = ev._parse_float(wr_el, "map/ratio/widthRatio")
            if hr_el is not None:
                hr, _ = ev._parse_float(hr_el, "map/ratio/heightRatio")
        zoom = ev._parse_int(ev._child(map_el, "zoom", "map/"), "map/zoom")
        entries.append(
            MapView(
                url=url, image_width=width, image_height=height,
                top_left=tl, bottom_right=br,
                width_ratio=wr, height_ratio=hr, zoom=zoom,
            )
        )
    return MapCatalog(entries)


def load_map_catalog(path: str) -> MapCatalog:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_map_catalog(fh.read())


# ---------------------------------------------------------------------------
# Handlers


def authenticate(e: Event, allowlist: frozenset | set | None,
                 source_tag: str | None = None) -> str | None:
    """None to accept; otherwise the rejection reason.

    With no allowlist configured, everything is accepted. Otherwise the
    message's principal (its ID element, or the sender's for submissions)
    must appear on the list.
    """
    if allowlist is None:
        return None
    principal = ev.principal_id(e)
    if principal.email in allowlist or principal in allowlist:
        return None
    return f"origin {principal.email!r} not on allowlist"


def handle_map(req: MapRequest, catalog: MapCatalog, cache: ViewCache) -> MapResponse | None:
    """Select a map for the request; None when the catalog has nothing
    (no reply is sent in that case, the caller counts it)."""
    view = catalog.select(req.coord, req.zoom)
    if view is None:
        return None
    cache.put(req.id, view)
    return MapResponse(target=req.id, view=view)


def handle_hearsay(
    msg: HearsayRequest | HearsaySubmission | MapResponse,
    store: HearsayStore,
    flags: ServiceFlags,
    cache: ViewCache,
) -> list:
    """Returns the deliveries to route right now."""
    if isinstance(msg, HearsayRequest):
        flags.hearsay[msg.id] = msg.activate
        return []
    if isinstance(msg, HearsaySubmission):
        receiver = msg.receiver.id
        if not flags.hearsay_active(receiver):
            return []
        delivery = HearsayDelivery(
            target=receiver, sender=msg.sender, receiver=msg.receiver, message=msg.message
        )
        stored = store.append(delivery)
        view = cache.get(receiver)
        if view is None or geo.contains(view, stored.delivery_location):
            return [delivery]
        return []
    if isinstance(msg, MapResponse):
        viewer = msg.target
        if not flags.hearsay_active(viewer):
            return []
        return [
            s.delivery
            for s in store.deliveries
            if s.target == viewer and geo.contains(msg.view, s.delivery_location)
        ]
    return []


def handle_radar(
    msg: RadarRequest | LocationEvent, cache: ViewCache, flags: ServiceFlags
) -> list:
    if isinstance(msg, RadarRequest):
        flags.radar[msg.id] = msg.activate
        return []
    if isinstance(msg, LocationEvent):
        source = msg.id
        out = []
        for viewer in cache.users():
            if viewer == source or not flags.radar_active(viewer):
                continue
            view = cache.get(viewer)
            if view is not None and geo.contains(view, msg.where):
                out.append(RadarResponse(target=viewer, location=msg))
        return out
    return []


def handle_trails(
    msg: TrailRequest | TrailSubmission | MapResponse,
    store: TrailStore,
    flags: ServiceFlags,
) -> list:
    if isinstance(msg, TrailRequest):
        flags.trails[msg.id] = msg.activate
        flags.trails_filter[msg.id] = frozenset(msg.desired_users)
        return []
    if isinstance(msg, TrailSubmission):
        store.append(msg.trail)
        return []
    if isinstance(msg, MapResponse):
        viewer = msg.target
        if not flags.trails_active(viewer):
            return []
        return [
            TrailsResponse(target=viewer, trail=t.points)
            for t in store.trails
            if flags.wants_trail_from(viewer, t.owner)
            and geo.trail_intersects_view(t.points, msg.view)
        ]
    return []


def route(e: Event, registry: SessionRegistry, connections: ConnectionTable) -> bool:
    """Deliver a targeted event over its user's registered connection.
    Returns False when the user is unregistered or the write fails (the
    dead tag is unregistered in that case)."""
    target = ev.target_id(e)
    if target is None:
        return False
    tag = registry.tag_for(target)
    if tag is None:
        return False
    writer = connections.get(tag)
    if writer is None:
        registry.drop_tag(tag)
        return False
    try:
        writer.send_line(ev.serialize_event(e))
        return True
    except OSError:
        connections.remove(tag)
        registry.drop_tag(tag)
        return False


# Inbound kinds whose top-level ID identifies the connection's user.
_SELF_IDENTIFYING = (LocationEvent, HearsayRequest, RadarRequest, TrailRequest, MapRequest)


# ---------------------------------------------------------------------------
# Pipeline components


class SecurityChecker(Component):
    """Parses inbound XML into typed events, authenticates their origin, and
    auto-registers the sender's session from self-identifying messages."""

    inputs = ("in",)
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.rejected = 0
        self.unparseable = 0

    def on_message(self, port, msg):
        if msg.kind == "event":
            e = msg.payload
        else:
            try:
                e = ev.parse_event(msg.payload)
            except ev.EventError:
                self.unparseable += 1
                return
        reason = authenticate(e, self.env.get("allowlist"), msg.meta.get("tag"))
        if reason is not None:
            self.rejected += 1
            log.debug("rejected message: %s", reason)
            return
        tag = msg.meta.get("tag")
        registry = self.env.get("registry")
        if tag and registry is not None and isinstance(e, _SELF_IDENTIFYING):
            registry.register(e.id, tag)
        self.emit("out", Message.event(e, **msg.meta))


class MapModule(Component):
    inputs = ("in",)
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.cache = ViewCache()
        self.no_map = 0

    def on_message(self, port, msg):
        e = msg.payload
        if not isinstance(e, MapRequest):
            return
        response = handle_map(e, self.env["catalog"], self.cache)
        if response is None:
            self.no_map += 1
            log.info("no map for (%s, %s) zoom %s", e.coord.latitude, e.coord.longitude, e.zoom)
            return
        self.emit("out", Message.event(response, **msg.meta))


class UserMapBuffer(Component):
    """Caches the current map view of each user."""

    inputs = ("in",)
    outputs = ()

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.cache = ViewCache()

    def on_message(self, port, msg):
        e = msg.payload
        if isinstance(e, MapResponse):
            self.cache.put(e.target, e.view)


class HearsayModule(Component):
    inputs = ("in", "view")
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.flags = ServiceFlags()
        self.store = HearsayStore()
        self.cache = ViewCache()

    def on_message(self, port, msg):
        e = msg.payload
        if isinstance(e, MapResponse):
            self.cache.put(e.target, e.view)
        if isinstance(e, (HearsayRequest, HearsaySubmission, MapResponse)):
            for delivery in handle_hearsay(e, self.store, self.flags, self.cache):
                self.emit("out", Message.event(delivery))


class RadarModule(Component):
    inputs = ("in", "view")
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.flags = ServiceFlags()
        self.cache = ViewCache()

    def on_message(self, port, msg):
        e = msg.payload
        if isinstance(e, MapResponse):
            self.cache.put(e.target, e.view)
            return
        if isinstance(e, (RadarRequest, LocationEvent)):
            for response in handle_radar(e, self.cache, self.flags):
                self.emit("out", Message.event(response))


class TrailsModule(Component):
    inputs = ("in", "view")
    outputs = ("out",)

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.flags = ServiceFlags()
        self.store = TrailStore()

    def on_message(self, port, msg):
        e = msg.payload
        if isinstance(e, (TrailRequest, TrailSubmission, MapResponse)):
            for response in handle_trails(e, self.store, self.flags):
                self.emit("out", Message.event(response))


class EventServer(Component):
    """Filters targeted messages and sends each to its user's connection."""

    inputs = ANY_PORT
    outputs = ()

    def __init__(self, name, config, env):
        super().__init__(name, config, env)
        self.delivered = 0
        self.dropped = 0

    def on_message(self, port, msg):
        e = msg.payload
        if ev.target_id(e) is None:
            return
        if route(e, self.env["registry"], self.env["connections"]):
            self.delivered += 1
        else:
            self.dropped += 1


def _register_service_components():
    for name, cls in (
        ("SecurityChecker", SecurityChecker),
        ("MapModule", MapModule),
        ("UserMapBuffer", UserMapBuffer),
        ("HearsayModule", HearsayModule),
        ("RadarModule", RadarModule),
        ("TrailsModule", TrailsModule),
        ("EventServer", EventServer),
    ):
        try:
            register_component_type(name, cls)
        except Exception:
            pass


_register_service_components()


# ---------------------------------------------------------------------------
# Server assembly


def build_server_spec(port: int, host: str = "127.0.0.1") -> AssemblySpec:
    """The generic server topology: socket adapter -> XML filter -> security
    checker -> event bus fanning to the second bus plus the four service
    modules, whose responses funnel into the event server.

    Map responses travel over a second fan-out bus that reaches the modules
    *before* the event server, so a client that has seen its map response is
    guaranteed the server-side view caches were already updated.
    """
    c = ComponentSpec
    w = Connection
    modules = ["map", "hearsay", "radar", "trails"]
    return AssemblySpec(
        name="generic-server",
        components=[
            c("IPSocketAdapter", "sock", {"port": str(port), "host": host}),
            c("XMLFilter", "filter"),
            c("SecurityChecker", "security"),
            c("EventBus", "inbus"),
            c("EventBus", "bus2"),
            c("MapModule", "map"),
            c("EventBus", "viewbus"),
            c("UserMapBuffer", "buffer"),
            c("HearsayModule", "hearsay"),
            c("RadarModule", "radar"),
            c("TrailsModule", "trails"),
            c("EventServer", "eventserver"),
        ],
        connections=[
            w("sock", "out", "filter", "in"),
            w("filter", "out", "security", "in"),
            w("security", "out", "inbus", "in"),
            w("inbus", "out", "bus2", "in"),
            *[w("inbus", "out", m, "in") for m in modules],
            w("map", "out", "viewbus", "in"),
            w("viewbus", "out", "buffer", "in"),
            w("viewbus", "out", "hearsay", "view"),
            w("viewbus", "out", "radar", "view"),
            w("viewbus", "out", "trails", "view"),
            w("viewbus", "out", "eventserver", "map_in"),
            w("hearsay", "out", "eventserver", "hearsay_in"),
            w("radar", "out", "eventserver", "radar_in"),
            w("trails", "out", "eventserver", "trails_in"),
        ],
        exports=[Export("inbound", "filter", "inject")],
    )


def make_server_env(catalog: MapCatalog, allowlist: set | None = None) -> dict:
    return {
        "catalog": catalog,
        "allowlist": allowlist,
        "registry": SessionRegistry(),
        "connections": ConnectionTable(),
    }
