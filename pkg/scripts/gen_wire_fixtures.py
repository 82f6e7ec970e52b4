#!/usr/bin/env python3
"""Generate golden wire forms shared with the web client.

The browser builds request documents itself; these fixtures pin its output
byte-for-byte to the server-side serializer for a fixed set of field
values.

Usage: python scripts/gen_wire_fixtures.py [--out shared/golden_wire.json]
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gloss import events as ev  # noqa: E402

T = ev.Timestamp.parse("2003-08-17T18:31:59:516")
HERE = ev.GeoCoord(56.340232849121094, -2.808)
THERE = ev.GeoCoord(56.360232849121094, -2.80704378657099)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="shared/golden_wire.json")
    args = parser.parse_args()

    graham = ev.UserId("graham@dcs.st-and.ac.uk")
    al = ev.UserId("al@dcs.st-and.ac.uk")
    ron = ev.UserId("ron@dcs.st-and.ac.uk")
    vangelis = ev.UserId("vangelis@dcs.st-and.ac.uk")

    fixtures = {
        "radarRequest_off": ev.serialize_event(ev.RadarRequest(graham, False)),
        "radarRequest_on": ev.serialize_event(ev.RadarRequest(graham, True)),
        "hearsayRequest_on": ev.serialize_event(ev.HearsayRequest(graham, True)),
        "trailRequest_all": ev.serialize_event(ev.TrailRequest(al, True, ())),
        "trailRequest_filtered": ev.serialize_event(
            ev.TrailRequest(al, True, (vangelis, graham))
        ),
        "mapRequest": ev.serialize_event(ev.MapRequest(vangelis, HERE, 5)),
        "locationEvent": ev.serialize_event(
            ev.LocationEvent(id=vangelis, observed_at=T, where=HERE)
        ),
        "hearsaySubmission": ev.serialize_event(
            ev.HearsaySubmission(
                sender=ev.LocationEvent(id=al, observed_at=ev.Timestamp.parse("2003-05-16T18:31:59:516"), where=THERE),
                receiver=ev.LocationEvent(id=ron, observed_at=T, where=HERE),
                message="Hello Vangelis",
            )
        ),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixtures, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(fixtures)} wire fixtures to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
