#!/usr/bin/env python3
"""Scripted two-client walkthrough against an in-process server.

Starts the generic server on an ephemeral port, connects two TCP clients,
and drives the canonical exchange: map request, radar and hearsay
activation, a location report, and a hearsay submission. Prints every
message each client receives.

Usage: python scripts/demo_session.py
"""

import socket
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gloss import events as ev  # noqa: E402
from gloss import pipeline as pl  # noqa: E402
from gloss import services as sv  # noqa: E402

CITY = (56.340232849121094, -2.808)

REFERENCE_VIEW = ev.MapView(
    url="http://www-systems.dcs.st-and.ac.uk:8180/gloss/standrews_city_600600.jpg",
    image_width=600,
    image_height=600,
    top_left=ev.GeoCoord(56.370100, -2.842174),
    bottom_right=ev.GeoCoord(56.316349, -2.744143),
    zoom=5,
)


class Client:
    def __init__(self, name: str, port: int):
        self.name = name
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=5)
        self.reader = self.sock.makefile("r", encoding="utf-8")

    def send(self, event):
        print(f"[{self.name}] -> {ev.event_kind(event)}")
        self.sock.sendall((ev.serialize_event(event) + "\n").encode("utf-8"))

    def recv(self):
        line = self.reader.readline().strip()
        event = ev.parse_event(line)
        print(f"[{self.name}] <- {ev.event_kind(event)}: {line[:100]}...")
        return event

    def close(self):
        self.sock.close()


def located(user, second, coord=CITY):
    t = ev.Timestamp.parse("2003-08-17T12:00:00:000").add_ms(second * 1000)
    return ev.LocationEvent(id=user, observed_at=t, where=ev.GeoCoord(*coord))


def main() -> int:
    env = sv.make_server_env(sv.MapCatalog([REFERENCE_VIEW]))
    handle = pl.build_assembly(sv.build_server_spec(0), env)
    handle.start()
    port = handle.component("sock").bound_port
    print(f"server on 127.0.0.1:{port}")

    walker = Client("walker", port)
    viewer = Client("viewer", port)
    viewer_id = ev.UserId("viewer@demo")
    walker_id = ev.UserId("walker@demo")
    try:
        viewer.send(ev.MapRequest(viewer_id, ev.GeoCoord(*CITY), 5))
        viewer.recv()  # the map, now cached as the viewer's view
        viewer.send(ev.RadarRequest(viewer_id, True))
        viewer.send(ev.HearsayRequest(viewer_id, True))
        time.sleep(0.3)

        walker.send(located(walker_id, 1))
        viewer.recv()  # radar response: the walker entered the view

        walker.send(
            ev.HearsaySubmission(
                sender=located(walker_id, 2),
                receiver=located(viewer_id, 3),
                message="Hello from the demo walker",
            )
        )
        viewer.recv()  # hearsay delivery
        print("demo complete")
        return 0
    finally:
        walker.close()
        viewer.close()
        handle.stop()


if __name__ == "__main__":
    sys.exit(main())
