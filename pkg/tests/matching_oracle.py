"""Brute-force reference matcher and a (pattern, stream) corpus generator.

The reference enumerates every subsequence of the stream and tests it
against the pattern semantics directly, with its own field access, its own
distance formula (atan2 form) and its own time handling, so it shares no
matching code with the engine under test.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

from gloss import events as ev
from gloss import matching as mt

BASE_T = ev.Timestamp.parse("2003-08-17T12:00:00:000")


@dataclass(frozen=True)
class Entry:
    idx: int
    event: ev.Event
    time: ev.Timestamp
    timed: bool
    coord: object


def _ref_time(e):
    if isinstance(e, ev.LocationEvent):
        return e.observed_at
    if isinstance(e, (ev.HearsaySubmission, ev.HearsayDelivery)):
        return e.receiver.observed_at
    if isinstance(e, ev.RadarResponse):
        return e.location.observed_at
    if isinstance(e, (ev.TrailSubmission, ev.TrailsResponse)):
        return max(p.observed_at for p in e.trail)
    return None


def _ref_coord(e):
    if isinstance(e, ev.LocationEvent):
        return e.where
    if isinstance(e, (ev.HearsaySubmission, ev.HearsayDelivery)):
        return e.receiver.where
    if isinstance(e, ev.RadarResponse):
        return e.location.where
    if isinstance(e, ev.MapRequest):
        return e.coord
    if isinstance(e, (ev.TrailSubmission, ev.TrailsResponse)):
        return e.trail[0].where
    return None


def _ref_distance(a, b) -> float:
    p1, p2 = math.radians(a.latitude), math.radians(b.latitude)
    dl = math.radians(b.longitude - a.longitude)
    y = math.sqrt(
        (math.cos(p2) * math.sin(dl)) ** 2
        + (math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)) ** 2
    )
    x = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return 6_371_000.0 * math.atan2(y, x)


def _ref_field(e, name):
    if name == "id":
        if isinstance(e, ev.TrailSubmission):
            return e.trail[0].id.email
        if hasattr(e, "id"):
            return e.id.email
        return e.target.email
    if name == "activate":
        return e.activate
    if name == "message":
        return e.message
    if name == "sender_id":
        return e.sender.id.email
    if name == "receiver_id":
        return e.receiver.id.email
    if name == "subject_id":
        return e.location.id.email
    if name == "zoom":
        return e.zoom if isinstance(e, ev.MapRequest) else e.view.zoom
    if name == "url":
        return e.view.url
    if name == "length":
        return len(e.trail)
    if name == "latitude":
        return _ref_coord(e).latitude
    if name == "longitude":
        return _ref_coord(e).longitude
    raise AssertionError(f"oracle has no accessor for {name}")


def stream_entries(stream) -> list:
    """Assign effective times: untimed events inherit the stream clock."""
    entries = []
    clock = mt.EPOCH
    for i, e in enumerate(stream, start=1):
        t = _ref_time(e)
        timed = t is not None
        if timed:
            clock = t
        entries.append(Entry(i, e, t if timed else clock, timed, _ref_coord(e)))
    return entries


def _leaf_ok(flt: mt.Filter, en: Entry, full) -> bool:
    if ev.event_kind(en.event) != flt.kind:
        return False
    for p in flt.predicates:
        if p.op == "within_m":
            prevs = [x.coord for x in full if x.idx < en.idx and x.coord is not None]
            if en.coord is None or not prevs:
                return False
            if _ref_distance(en.coord, prevs[-1]) > p.literal:
                return False
            continue
        value = _ref_field(en.event, p.fieldname)
        lit = p.literal
        if p.op == "=":
            ok = value == lit
        elif p.op == "!=":
            ok = value != lit
        elif isinstance(value, (int, float)) and not isinstance(value, bool) and isinstance(lit, float):
            ok = value < lit if p.op == "<" else value > lit
        else:
            ok = False
        if not ok:
            return False
    return True


def _splits(n: int, parts: int):
    """All ways to cut range(n) into ``parts`` non-empty consecutive slices."""
    for cuts in itertools.combinations(range(1, n), parts - 1):
        bounds = (0,) + cuts + (n,)
        yield [(bounds[i], bounds[i + 1]) for i in range(parts)]


def _seq_time_ok(groups) -> bool:
    running = None
    for g in groups:
        times = [en.time for en in g if en.timed]
        if times:
            if running is not None and not min(times) > running:
                return False
            running = max(times) if running is None else max(running, max(times))
    return True


def ref_matches(expr, part, full) -> bool:
    if isinstance(expr, mt.Filter):
        return len(part) == 1 and _leaf_ok(expr, part[0], full)
    if isinstance(expr, mt.Seq):
        n = len(expr.children)
        if len(part) < n:
            return False
        for cut in _splits(len(part), n):
            groups = [part[a:b] for a, b in cut]
            if _seq_time_ok(groups) and all(
                ref_matches(c, g, full) for c, g in zip(expr.children, groups)
            ):
                return True
        return False
    if isinstance(expr, mt.And):
        n = len(expr.children)
        if len(part) < n:
            return False
        for assignment in itertools.product(range(n), repeat=len(part)):
            groups = [
                tuple(p for p, a in zip(part, assignment) if a == i) for i in range(n)
            ]
            if all(groups) and all(
                ref_matches(c, g, full) for c, g in zip(expr.children, groups)
            ):
                return True
        return False
    if isinstance(expr, mt.Or):
        return any(ref_matches(c, part, full) for c in expr.children)
    if isinstance(expr, mt.Within):
        times = [en.time for en in part if en.timed]
        if len(times) >= 2 and (max(times).dt - min(times).dt).total_seconds() > expr.seconds:
            return False
        return ref_matches(expr.child, part, full)
    raise TypeError(expr)


def ref_emissions(spec: mt.PatternSpec, stream) -> set:
    """Every matching subsequence, identified by its 1-based stream indices."""
    entries = stream_entries(stream)
    out = set()
    for size in range(1, len(entries) + 1):
        for subseq in itertools.combinations(entries, size):
            if ref_matches(spec.expr, subseq, subseq):
                out.add(tuple(en.idx for en in subseq))
    return out


def engine_emissions(spec: mt.PatternSpec, stream, cap: int = 200_000):
    """Run the real engine; returns (emission index-set, complex events)."""
    engine = mt.Engine(partial_cap=cap)
    engine.add_pattern(spec)
    index_of = {id(e): i for i, e in enumerate(stream, start=1)}
    out = set()
    complexes = []
    for e in stream:
        for ce in engine.ingest(e):
            out.add(tuple(index_of[id(c)] for c in ce.constituents))
            complexes.append(ce)
    return out, complexes


# ---------------------------------------------------------------------------
# Corpus generation


USERS = ["al@x", "ron@x", "vangelis@x"]


def random_stream(rng: random.Random, max_events: int = 8) -> list:
    stream = []
    for _ in range(rng.randint(2, max_events)):
        roll = rng.random()
        user = ev.UserId(rng.choice(USERS))
        if roll < 0.7:
            stream.append(
                ev.LocationEvent(
                    id=user,
                    observed_at=BASE_T.add_ms(rng.randint(0, 100) * 1000),
                    where=ev.GeoCoord(
                        56.3 + rng.uniform(0, 0.02), -2.81 + rng.uniform(0, 0.02)
                    ),
                )
            )
        elif roll < 0.85:
            stream.append(ev.RadarRequest(user, rng.random() < 0.5))
        else:
            stream.append(ev.HearsayRequest(user, rng.random() < 0.5))
    return stream


def _random_filter(rng: random.Random) -> str:
    roll = rng.random()
    if roll < 0.55:
        preds = []
        if rng.random() < 0.75:
            preds.append(f'id="{rng.choice(USERS)}"')
        if rng.random() < 0.2:
            preds.append(f"latitude {rng.choice('<>')} {56.3 + rng.uniform(0, 0.02):.6f}")
        if rng.random() < 0.15:
            preds.append(f"where within_m {rng.choice([200, 500, 1000, 2000])}")
        return f"locationEvent({', '.join(preds)})"
    if roll < 0.8:
        preds = []
        if rng.random() < 0.6:
            preds.append(f'id="{rng.choice(USERS)}"')
        if rng.random() < 0.5:
            preds.append(f"activate = {rng.choice(['true', 'false'])}")
        return f"radarRequest({', '.join(preds)})"
    return f'hearsayRequest(id="{rng.choice(USERS)}")'


def random_pattern_text(rng: random.Random, depth: int, index: int) -> str:
    def expr(d: int) -> str:
        if d <= 1:
            return _random_filter(rng)
        roll = rng.random()
        if roll < 0.2:
            return f"WITHIN {rng.choice([15, 30, 60, 90])} {expr(d - 1)}"
        combinator = rng.choice(["SEQ", "SEQ", "AND", "OR"])
        arity = 2 if rng.random() < 0.8 else 3
        children = ", ".join(expr(rng.randint(1, d - 1)) for _ in range(arity))
        return f"{combinator}({children})"

    return f"PATTERN p{index} WHEN {expr(depth)} EMIT c{index}"


def corpus(seed: int, pairs: int):
    """Yields (pattern_spec, stream) pairs of bounded depth and length."""
    rng = random.Random(seed)
    for i in range(pairs):
        depth = rng.randint(1, 3)
        spec = mt.parse_pattern(random_pattern_text(rng, depth, i))
        yield spec, random_stream(rng)
