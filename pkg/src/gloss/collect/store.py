"""Transition-only persistence: an append-only record log with an
in-memory index, storing one record per sensor state change at one-second
resolution (plus a baseline record on first observation)."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path


class StoreError(Exception):
    pass


class TimeRegression(StoreError):
    pass


class BadRange(StoreError):
    pass


@dataclass(frozen=True)
class TransitionRecord:
    sensor: str
    second: int
    state: bool


class TransitionStore:
    """Single-writer transition log; reads may come from other threads."""

    def __init__(self, log_path: str | None = None):
        self._records: list[TransitionRecord] = []
        self._last: dict[str, TransitionRecord] = {}
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path else None
        self._log_file = None
        if self._log_path is not None:
            if self._log_path.exists():
                self._replay_log()
            self._log_file = open(self._log_path, "a", encoding="utf-8", buffering=1)

    def _replay_log(self):
        with open(self._log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                second, state, sensor = line.split(" ", 2)
                self._append(TransitionRecord(sensor, int(second), state == "1"))

    def _append(self, record: TransitionRecord):
        self._records.append(record)
        self._last[record.sensor] = record

    def record(self, sensor: str, second: int, state: bool) -> bool:
        """Store iff the state differs from the sensor's last stored state;
        the first observation is always stored as a baseline."""
        state = bool(state)
        with self._lock:
            last = self._last.get(sensor)
            if last is not None:
                if state == last.state:
                    if second < last.second:
                        raise TimeRegression(
                            f"{sensor}: {second} precedes last stored {last.second}"
                        )
                    return False
                if second <= last.second:
                    raise TimeRegression(
                        f"{sensor}: transition at {second} not after {last.second}"
                    )
            rec = TransitionRecord(sensor, second, state)
            self._append(rec)
            if self._log_file is not None:
                self._log_file.write(f"{rec.second} {1 if rec.state else 0} {rec.sensor}\n")
            return True

    def query(self, from_second: int, to_second: int) -> list:
        """All records with from <= t <= to, ordered by (t, sensor name)."""
        if from_second > to_second:
            raise BadRange(f"{from_second} > {to_second}")
        with self._lock:
            hits = [r for r in self._records if from_second <= r.second <= to_second]
        return sorted(hits, key=lambda r: (r.second, r.sensor))

    def last_state(self, sensor: str) -> bool | None:
        with self._lock:
            last = self._last.get(sensor)
            return None if last is None else last.state

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def all_records(self) -> list:
        with self._lock:
            return list(self._records)

    def close(self):
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None


def record_transition(store: TransitionStore, sensor: str, second: int, state: bool) -> bool:
    return store.record(sensor, second, state)


def query_range(store: TransitionStore, from_second: int, to_second: int) -> list:
    return store.query(from_second, to_second)
