"""Randomized routing scenarios checked against brute-force filters.

Each ``run_*_scenario`` builds a random population of users, views, flags
and stores, applies one message through the real handler, and returns the
(actual, expected) emission sets, where the expected side is computed by a
direct interval-arithmetic filter independent of the geo module.
"""

from __future__ import annotations

import random

from gloss import events as ev
from gloss import services as sv

_ms_counter = [0]


def oracle_contains(view: ev.MapView, c: ev.GeoCoord) -> bool:
    return (
        view.bottom_right.latitude <= c.latitude <= view.top_left.latitude
        and view.top_left.longitude <= c.longitude <= view.bottom_right.longitude
    )


def _next_timestamp() -> ev.Timestamp:
    _ms_counter[0] += 1
    return ev.Timestamp.parse("2003-08-17T12:00:00:000").add_ms(_ms_counter[0])


def _coord(rng: random.Random) -> ev.GeoCoord:
    return ev.GeoCoord(rng.uniform(55.0, 57.0), rng.uniform(-4.0, -1.0))


def _view(rng: random.Random) -> ev.MapView:
    lat = rng.uniform(55.2, 56.8)
    lon = rng.uniform(-3.8, -1.2)
    dlat = rng.uniform(0.05, 0.8)
    dlon = rng.uniform(0.05, 0.8)
    return ev.MapView(
        url=f"map-{rng.randrange(10_000)}",
        image_width=600,
        image_height=600,
        top_left=ev.GeoCoord(lat + dlat, lon - dlon),
        bottom_right=ev.GeoCoord(lat - dlat, lon + dlon),
        zoom=5,
    )


def _location(rng: random.Random, user: ev.UserId) -> ev.LocationEvent:
    return ev.LocationEvent(id=user, observed_at=_next_timestamp(), where=_coord(rng))


def _users(rng: random.Random) -> list:
    return [ev.UserId(f"u{i}@test") for i in range(rng.randint(2, 10))]


def _population(rng: random.Random):
    users = _users(rng)
    cache = sv.ViewCache()
    flags = sv.ServiceFlags()
    for u in users:
        if rng.random() < 0.7:
            cache.put(u, _view(rng))
        flags.radar[u] = rng.random() < 0.5
        flags.hearsay[u] = rng.random() < 0.5
        flags.trails[u] = rng.random() < 0.6
        if rng.random() < 0.5:
            flags.trails_filter[u] = frozenset(
                rng.sample(users, rng.randint(0, len(users)))
            )
    return users, cache, flags


def run_radar_scenario(rng: random.Random):
    users, cache, flags = _population(rng)
    source = rng.choice(users)
    event = _location(rng, source)

    actual = {r.target for r in sv.handle_radar(event, cache, flags)}
    expected = {
        u
        for u in users
        if u != source
        and flags.radar.get(u, False)
        and cache.get(u) is not None
        and oracle_contains(cache.get(u), event.where)
    }
    return actual, expected


def run_hearsay_submission_scenario(rng: random.Random):
    users, cache, flags = _population(rng)
    store = sv.HearsayStore()
    sender, receiver = rng.choice(users), rng.choice(users)
    submission = ev.HearsaySubmission(
        sender=_location(rng, sender),
        receiver=_location(rng, receiver),
        message=f"m{rng.randrange(1000)}",
    )

    actual = {d.target for d in sv.handle_hearsay(submission, store, flags, cache)}
    view = cache.get(receiver)
    expected = (
        {receiver}
        if flags.hearsay.get(receiver, False)
        and (view is None or oracle_contains(view, submission.receiver.where))
        else set()
    )
    stored_expected = 1 if flags.hearsay.get(receiver, False) else 0
    assert len(store) == stored_expected
    return actual, expected


def run_hearsay_viewchange_scenario(rng: random.Random):
    users, cache, flags = _population(rng)
    store = sv.HearsayStore()
    for _ in range(rng.randint(0, 8)):
        target = rng.choice(users)
        delivery = ev.HearsayDelivery(
            target=target,
            sender=_location(rng, rng.choice(users)),
            receiver=_location(rng, target),
            message=f"m{rng.randrange(1000)}",
        )
        store.append(delivery)
    viewer = rng.choice(users)
    change = ev.MapResponse(target=viewer, view=_view(rng))

    actual = set(sv.handle_hearsay(change, store, flags, cache))
    expected = {
        s.delivery
        for s in store.deliveries
        if flags.hearsay.get(viewer, False)
        and s.target == viewer
        and oracle_contains(change.view, s.delivery_location)
    }
    return actual, expected


def run_trails_viewchange_scenario(rng: random.Random):
    users, cache, flags = _population(rng)
    store = sv.TrailStore()
    for _ in range(rng.randint(0, 6)):
        owner = rng.choice(users)
        points = tuple(_location(rng, owner) for _ in range(rng.randint(1, 4)))
        store.append(points)
    viewer = rng.choice(users)
    change = ev.MapResponse(target=viewer, view=_view(rng))

    actual = {r.trail for r in sv.handle_trails(change, store, flags)}
    chosen = flags.trails_filter.get(viewer, frozenset())
    expected = {
        t.points
        for t in store.trails
        if flags.trails.get(viewer, False)
        and (not chosen or t.owner in chosen)
        and any(oracle_contains(change.view, p.where) for p in t.points)
    }
    return actual, expected


ALL_SCENARIOS = (
    run_radar_scenario,
    run_hearsay_submission_scenario,
    run_hearsay_viewchange_scenario,
    run_trails_viewchange_scenario,
)


def run_mixed_scenarios(seed: int, count: int) -> int:
    """Run ``count`` scenarios cycling over all services; returns mismatches."""
    rng = random.Random(seed)
    mismatches = 0
    for i in range(count):
        actual, expected = ALL_SCENARIOS[i % len(ALL_SCENARIOS)](rng)
        if actual != expected:
            mismatches += 1
    return mismatches
