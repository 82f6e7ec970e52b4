#!/usr/bin/env python3
"""Generate the shared geo test-vector file consumed by the web client.

Each JSON line holds a (view, coord, pixel) triple computed by the server
side's pixel mapping; the web client must render markers at exactly these
pixel positions, so both components are pinned to the same math.

Usage: python scripts/gen_geo_vectors.py [--out shared/geo_vectors.jsonl]
"""

import argparse
import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gloss import events as ev  # noqa: E402
from gloss import geo  # noqa: E402

REFERENCE_VIEW = ev.MapView(
    url="http://www-systems.dcs.st-and.ac.uk:8180/gloss/standrews_city_600600.jpg",
    image_width=600,
    image_height=600,
    top_left=ev.GeoCoord(56.370100, -2.842174),
    bottom_right=ev.GeoCoord(56.316349, -2.744143),
    zoom=5,
)


def view_dict(v: ev.MapView) -> dict:
    return {
        "url": v.url,
        "imageWidth": v.image_width,
        "imageHeight": v.image_height,
        "topLeft": {"latitude": v.top_left.latitude, "longitude": v.top_left.longitude},
        "bottomRight": {
            "latitude": v.bottom_right.latitude,
            "longitude": v.bottom_right.longitude,
        },
        "zoom": v.zoom,
    }


def vector(view: ev.MapView, coord: ev.GeoCoord) -> dict:
    pixel = geo.to_pixel(view, coord)
    return {
        "view": view_dict(view),
        "coord": {"latitude": coord.latitude, "longitude": coord.longitude},
        "pixel": {"x": pixel.x, "y": pixel.y},
    }


def random_view(rng: random.Random) -> ev.MapView:
    lat = rng.uniform(-70, 70)
    lon = rng.uniform(-170, 170)
    dlat = rng.uniform(0.01, 2.0)
    dlon = rng.uniform(0.01, 2.0)
    return ev.MapView(
        url=f"vector-map-{rng.randrange(10_000)}",
        image_width=rng.choice([256, 600, 1024]),
        image_height=rng.choice([256, 600, 768]),
        top_left=ev.GeoCoord(lat + dlat, lon - dlon),
        bottom_right=ev.GeoCoord(lat - dlat, lon + dlon),
        zoom=rng.randint(0, 10),
    )


def contained_coord(rng: random.Random, view: ev.MapView) -> ev.GeoCoord:
    return ev.GeoCoord(
        rng.uniform(view.bottom_right.latitude, view.top_left.latitude),
        rng.uniform(view.top_left.longitude, view.bottom_right.longitude),
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="shared/geo_vectors.jsonl")
    parser.add_argument("--count", type=int, default=64)
    parser.add_argument("--seed", type=int, default=2003)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    vectors = [
        # the reference city view and the reference report coordinate
        vector(REFERENCE_VIEW, ev.GeoCoord(56.340232849121094, -2.808)),
        vector(REFERENCE_VIEW, ev.GeoCoord(56.370100, -2.842174)),  # top-left corner
        vector(REFERENCE_VIEW, ev.GeoCoord(56.316349, -2.744143)),  # bottom-right corner
    ]
    while len(vectors) < args.count:
        view = random_view(rng)
        vectors.append(vector(view, contained_coord(rng, view)))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for v in vectors:
            fh.write(json.dumps(v) + "\n")
    print(f"wrote {len(vectors)} vectors to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
