"""Geometric primitives: view containment, geo<->pixel mapping, distances.

Views are small city-scale rectangles that never cross the poles or the
antimeridian, so the pixel mapping is plain linear interpolation between
the corner coordinates (equirectangular), with the y axis growing south.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .events import GeoCoord, LocationEvent, MapView

EARTH_RADIUS_M = 6_371_000.0


class OutOfView(Exception):
    """Coordinate lies outside the view rectangle."""


class OutOfImage(Exception):
    """Pixel lies outside the image bounds."""


@dataclass(frozen=True)
class PixelPoint:
    x: float
    y: float


def contains(view: MapView, c: GeoCoord) -> bool:
    """Whether the view rectangle contains the coordinate (inclusive edges)."""
    return (
        view.bottom_right.latitude <= c.latitude <= view.top_left.latitude
        and view.top_left.longitude <= c.longitude <= view.bottom_right.longitude
    )


def to_pixel(view: MapView, c: GeoCoord) -> PixelPoint:
    """Map a contained coordinate onto image pixels (origin top-left)."""
    if not contains(view, c):
        raise OutOfView(f"({c.latitude}, {c.longitude}) outside view {view.url}")
    tl, br = view.top_left, view.bottom_right
    x = (c.longitude - tl.longitude) / (br.longitude - tl.longitude) * view.image_width
    y = (tl.latitude - c.latitude) / (tl.latitude - br.latitude) * view.image_height
    return PixelPoint(x, y)


def from_pixel(view: MapView, p: PixelPoint) -> GeoCoord:
    """Exact inverse of :func:`to_pixel`'s linear map."""
    if not (0 <= p.x <= view.image_width and 0 <= p.y <= view.image_height):
        raise OutOfImage(f"({p.x}, {p.y}) outside {view.image_width}x{view.image_height}")
    tl, br = view.top_left, view.bottom_right
    lon = tl.longitude + p.x / view.image_width * (br.longitude - tl.longitude)
    lat = tl.latitude - p.y / view.image_height * (tl.latitude - br.latitude)
    return GeoCoord(lat, lon)


def haversine_m(a: GeoCoord, b: GeoCoord) -> float:
    """Great-circle distance in meters over a spherical earth."""
    phi1 = math.radians(a.latitude)
    phi2 = math.radians(b.latitude)
    dphi = math.radians(b.latitude - a.latitude)
    dlam = math.radians(b.longitude - a.longitude)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def trail_intersects_view(trail: Sequence[LocationEvent] | Iterable[LocationEvent], view: MapView) -> bool:
    """Whether at least one trail point falls inside the view (no clipping)."""
    return any(contains(view, p.where) for p in trail)
