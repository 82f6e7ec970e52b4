"""Replayable calendars: a navigable clock stepping one second at a time,
notifying observers of time changes and, when a data model is attached, of
the records present at each new second.

The base calendar only moves time. The sensor calendar overrides the
temporal-event hook to consult its data model, so stepping it replays
stored transitions at the configured speed. Real-time mode disables
navigation entirely (there is no future data to read)."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .store import TransitionRecord


class NavigationUnavailable(Exception):
    pass


@dataclass(frozen=True)
class TimeNotification:
    second: int


@dataclass(frozen=True)
class EventNotification:
    second: int
    records: tuple


class ReplayModel:
    """Indexed access to a fixed set of transition records."""

    def __init__(self, records):
        self._by_second: dict[int, list] = {}
        for r in records:
            self._by_second.setdefault(r.second, []).append(r)
        self.first_second = min(self._by_second) if self._by_second else 0
        self.last_second = max(self._by_second) if self._by_second else 0

    def records_at(self, second: int) -> tuple:
        return tuple(self._by_second.get(second, ()))


class PlayableCalendar:
    """Navigable clock; knows nothing about data, only time."""

    def __init__(self, start_second: int, speed: float = 1.0, realtime: bool = False):
        if speed < 1:
            raise ValueError("playback speed must be >= 1")
        self.second = int(start_second)
        self.speed = float(speed)
        self.realtime = realtime
        self.time_observers: list = []
        self.event_observers: list = []

    def observe_time(self, callback) -> None:
        self.time_observers.append(callback)

    def observe_events(self, callback) -> None:
        self.event_observers.append(callback)

    def step(self, model=None) -> list:
        """Advance exactly one second; returns the notifications sent."""
        if self.realtime:
            raise NavigationUnavailable("cannot navigate in real-time mode")
        self.second += 1
        note = TimeNotification(self.second)
        for observer in self.time_observers:
            observer(note)
        return [note] + self.call_temporal_event(model)

    def call_temporal_event(self, model=None) -> list:
        # no data model here: time passes, nothing else happens
        return []

    def seek(self, second: int) -> None:
        if self.realtime:
            raise NavigationUnavailable("cannot navigate in real-time mode")
        self.second = int(second)


class SensorCalendar(PlayableCalendar):
    """Calendar wired to a data model; stepping checks for records."""

    def __init__(self, model: ReplayModel, start_second: int,
                 speed: float = 1.0, realtime: bool = False):
        super().__init__(start_second, speed, realtime)
        self.model = model

    def call_temporal_event(self, model=None) -> list:
        effective = model if model is not None else self.model
        records = effective.records_at(self.second)
        if not records:
            return []
        note = EventNotification(self.second, records)
        for observer in self.event_observers:
            observer(note)
        return [note]


def calendar_step(clock: PlayableCalendar, model=None) -> list:
    """Advance the clock one second; time observers always fire, event
    observers only when the model holds records at the new second."""
    return clock.step(model)


def replay(records, speed: float = 1.0, on_time=None, on_event=None,
           from_second: int | None = None, to_second: int | None = None) -> int:
    """Step through a recorded range at ``speed`` times real time.

    Each replayed second costs 1/speed wall seconds. Returns the number of
    event notifications delivered."""
    records = list(records)
    model = ReplayModel(records)
    start = model.first_second if from_second is None else from_second
    end = model.last_second if to_second is None else to_second
    clock = SensorCalendar(model, start - 1, speed=speed)
    if on_time:
        clock.observe_time(on_time)
    if on_event:
        clock.observe_events(on_event)
    events = 0
    step_cost = 1.0 / speed
    while clock.second < end:
        tick_started = time.monotonic()
        notes = clock.step()
        events += sum(1 for n in notes if isinstance(n, EventNotification))
        remaining = step_cost - (time.monotonic() - tick_started)
        if remaining > 0:
            time.sleep(remaining)
    return events


def reconstruct_states(records, from_second: int, to_second: int) -> dict:
    """Per-second state sequence per sensor implied by a transition log;
    used to check that the log reproduces aggregated history exactly."""
    by_sensor: dict[str, list] = {}
    for r in sorted(records, key=lambda r: (r.sensor, r.second)):
        by_sensor.setdefault(r.sensor, []).append(r)
    out: dict[str, list] = {}
    for sensor, recs in by_sensor.items():
        states = []
        current: bool | None = None
        idx = 0
        for second in range(from_second, to_second + 1):
            while idx < len(recs) and recs[idx].second <= second:
                current = recs[idx].state
                idx += 1
            states.append(current)
        out[sensor] = states
    return out
