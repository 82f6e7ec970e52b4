"""Shared strategies and helpers for the test suite."""

from __future__ import annotations

import socket
from datetime import datetime

import hypothesis.strategies as st

from gloss import events as ev

# Characters legal in XML 1.0 text content (surrogates and most control
# characters are not representable on the wire).
_BAD = "".join(chr(c) for c in range(0x20) if c not in (0x09, 0x0A, 0x0D)) + "￾￿"

xml_text = st.text(
    st.characters(blacklist_categories=("Cs",), blacklist_characters=_BAD),
    max_size=40,
)

_name_chars = "abcdefghijklmnopqrstuvwxyz0123456789._-"
_names = st.text(alphabet=_name_chars, min_size=1, max_size=12)

user_ids = st.builds(lambda a, b: ev.UserId(f"{a}@{b}"), _names, _names)

latitudes = st.floats(min_value=-90, max_value=90, allow_nan=False)
longitudes = st.floats(min_value=-180, max_value=180, allow_nan=False)
coords = st.builds(ev.GeoCoord, latitudes, longitudes)

timestamps = st.datetimes(
    min_value=datetime(1, 1, 1), max_value=datetime(9999, 12, 28)
).map(lambda d: ev.Timestamp(d.replace(microsecond=(d.microsecond // 1000) * 1000)))

location_events = st.builds(
    ev.LocationEvent,
    id=user_ids,
    observed_at=timestamps,
    where=coords,
    processing_sequence=xml_text,
)


@st.composite
def map_views(draw) -> ev.MapView:
    lat_a = draw(latitudes)
    lat_b = draw(latitudes.filter(lambda v: v != lat_a))
    lon_a = draw(longitudes)
    lon_b = draw(longitudes.filter(lambda v: v != lon_a))
    return ev.MapView(
        url=draw(_names),
        image_width=draw(st.integers(1, 4096)),
        image_height=draw(st.integers(1, 4096)),
        top_left=ev.GeoCoord(max(lat_a, lat_b), min(lon_a, lon_b)),
        bottom_right=ev.GeoCoord(min(lat_a, lat_b), max(lon_a, lon_b)),
        width_ratio=draw(st.floats(min_value=0.01, max_value=100, allow_nan=False)),
        height_ratio=draw(st.floats(min_value=0.01, max_value=100, allow_nan=False)),
        zoom=draw(st.integers(0, 20)),
    )


trails = st.lists(location_events, min_size=1, max_size=4).map(tuple)

events = st.one_of(
    location_events,
    st.builds(ev.HearsayRequest, id=user_ids, activate=st.booleans()),
    st.builds(ev.HearsaySubmission, sender=location_events, receiver=location_events, message=xml_text),
    st.builds(
        ev.HearsayDelivery,
        target=user_ids,
        sender=location_events,
        receiver=location_events,
        message=xml_text,
    ),
    st.builds(ev.RadarRequest, id=user_ids, activate=st.booleans()),
    st.builds(ev.RadarResponse, target=user_ids, location=location_events),
    st.builds(
        ev.TrailRequest,
        id=user_ids,
        activate=st.booleans(),
        desired_users=st.lists(user_ids, max_size=4).map(tuple),
    ),
    st.builds(ev.TrailSubmission, trail=trails),
    st.builds(ev.TrailsResponse, target=user_ids, trail=trails),
    st.builds(ev.MapRequest, id=user_ids, coord=coords, zoom=st.integers(0, 20)),
    st.builds(ev.MapResponse, target=user_ids, view=map_views()),
)


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]
