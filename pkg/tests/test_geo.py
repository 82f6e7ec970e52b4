"""Geometry tests: containment, pixel mapping, distances, trail checks."""

import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

import conftest
import golden
from gloss import events as ev
from gloss import geo


def city_view() -> ev.MapView:
    return ev.parse_event(golden.MAP_RESPONSE).view


# Reference coordinate from the golden location report.
CITY_POINT = ev.GeoCoord(56.340232849121094, -2.808)


def brute_contains(view: ev.MapView, c: ev.GeoCoord) -> bool:
    """Independent interval check used as the containment oracle."""
    return (
        view.bottom_right.latitude <= c.latitude <= view.top_left.latitude
        and view.top_left.longitude <= c.longitude <= view.bottom_right.longitude
    )


class TestContains:
    def test_city_point_inside(self):
        assert geo.contains(city_view(), CITY_POINT) is True

    def test_top_left_inclusive(self):
        v = city_view()
        assert geo.contains(v, ev.GeoCoord(v.top_left.latitude, v.top_left.longitude))

    def test_origin_outside(self):
        assert geo.contains(city_view(), ev.GeoCoord(0.0, 0.0)) is False

    @given(conftest.map_views(), conftest.coords)
    def test_matches_interval_oracle(self, view, c):
        assert geo.contains(view, c) == brute_contains(view, c)

    @given(conftest.coords, st.floats(0.001, 5), st.floats(0.001, 5))
    def test_monotone_under_enlargement(self, c, dlat, dlon):
        inner = ev.MapView(
            url="u", image_width=10, image_height=10,
            top_left=ev.GeoCoord(10.0, -10.0), bottom_right=ev.GeoCoord(-10.0, 10.0),
        )
        outer = ev.MapView(
            url="u", image_width=10, image_height=10,
            top_left=ev.GeoCoord(10.0 + dlat, -10.0 - dlon),
            bottom_right=ev.GeoCoord(-10.0 - dlat, 10.0 + dlon),
        )
        if geo.contains(inner, c):
            assert geo.contains(outer, c)


class TestPixelMapping:
    def test_city_point_pixels(self):
        # Frozen from an independent linear-interpolation pass over the
        # golden view corners: x = 209.162..., y = 333.394...
        p = geo.to_pixel(city_view(), CITY_POINT)
        assert p.x == pytest.approx(209.16240780977589, abs=1.0)
        assert p.y == pytest.approx(333.39455130778526, abs=1.0)

    def test_corners_map_to_image_corners(self):
        v = city_view()
        tl = geo.to_pixel(v, ev.GeoCoord(v.top_left.latitude, v.top_left.longitude))
        br = geo.to_pixel(v, ev.GeoCoord(v.bottom_right.latitude, v.bottom_right.longitude))
        tr = geo.to_pixel(v, ev.GeoCoord(v.top_left.latitude, v.bottom_right.longitude))
        bl = geo.to_pixel(v, ev.GeoCoord(v.bottom_right.latitude, v.top_left.longitude))
        assert (tl.x, tl.y) == (0.0, 0.0)
        assert (br.x, br.y) == (600.0, 600.0)
        assert (tr.x, tr.y) == (600.0, 0.0)
        assert (bl.x, bl.y) == (0.0, 600.0)

    def test_out_of_view_rejected(self):
        with pytest.raises(geo.OutOfView):
            geo.to_pixel(city_view(), ev.GeoCoord(0.0, 0.0))

    def test_from_pixel_origin_is_top_left(self):
        v = city_view()
        c = geo.from_pixel(v, geo.PixelPoint(0.0, 0.0))
        assert (c.latitude, c.longitude) == (v.top_left.latitude, v.top_left.longitude)

    def test_negative_pixel_rejected(self):
        with pytest.raises(geo.OutOfImage):
            geo.from_pixel(city_view(), geo.PixelPoint(-1.0, 0.0))

    @given(st.floats(56.316349, 56.370100), st.floats(-2.842174, -2.744143))
    def test_roundtrip_within_nanodegree(self, lat, lon):
        v = city_view()
        c = ev.GeoCoord(lat, lon)
        back = geo.from_pixel(v, geo.to_pixel(v, c))
        assert back.latitude == pytest.approx(lat, abs=1e-9)
        assert back.longitude == pytest.approx(lon, abs=1e-9)


def brute_haversine(a: ev.GeoCoord, b: ev.GeoCoord) -> float:
    """Independent spherical-law-of-cosines style oracle (atan2 form)."""
    p1, p2 = math.radians(a.latitude), math.radians(b.latitude)
    dl = math.radians(b.longitude - a.longitude)
    y = math.sqrt(
        (math.cos(p2) * math.sin(dl)) ** 2
        + (math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)) ** 2
    )
    x = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return 6_371_000.0 * math.atan2(y, x)


class TestHaversine:
    def test_zero_distance(self):
        assert geo.haversine_m(CITY_POINT, CITY_POINT) == 0.0

    def test_city_pair(self):
        b = ev.GeoCoord(56.360232849121094, -2.80704378657099)
        d = geo.haversine_m(CITY_POINT, b)
        assert d == pytest.approx(2224.678826351105, rel=0.01)
        assert d == pytest.approx(brute_haversine(CITY_POINT, b), rel=1e-9)

    def test_antipodal(self):
        a = ev.GeoCoord(0.0, 0.0)
        b = ev.GeoCoord(0.0, 180.0)
        assert geo.haversine_m(a, b) == pytest.approx(math.pi * 6_371_000.0, rel=0.001)

    @given(conftest.coords, conftest.coords)
    def test_symmetry(self, a, b):
        assert geo.haversine_m(a, b) == pytest.approx(geo.haversine_m(b, a), rel=1e-6, abs=1e-6)

    @settings(max_examples=200)
    @given(conftest.coords, conftest.coords, conftest.coords)
    def test_triangle_inequality(self, a, b, c):
        ab = geo.haversine_m(a, b)
        bc = geo.haversine_m(b, c)
        ac = geo.haversine_m(a, c)
        assert ac <= ab + bc + max(1e-6, 1e-6 * (ab + bc))


class TestTrailIntersection:
    def test_golden_trail_excluded_from_city_view(self):
        # The recorded trail sits 0.00013 degrees north of the view's top edge.
        trail = ev.parse_event(golden.TRAIL_SUBMISSION).trail
        assert geo.trail_intersects_view(trail, city_view()) is False

    def test_golden_trail_inside_enlarged_view(self):
        trail = ev.parse_event(golden.TRAIL_SUBMISSION).trail
        v = city_view()
        bigger = ev.MapView(
            url=v.url, image_width=v.image_width, image_height=v.image_height,
            top_left=ev.GeoCoord(56.38, v.top_left.longitude),
            bottom_right=v.bottom_right, zoom=v.zoom,
        )
        assert geo.trail_intersects_view(trail, bigger) is True

    @given(conftest.trails, conftest.map_views())
    def test_equals_pointwise_or(self, trail, view):
        expected = any(geo.contains(view, p.where) for p in trail)
        assert geo.trail_intersects_view(trail, view) == expected
