"""General event-matching engine: pattern language, incremental matcher,
complex-event emission, and runtime pattern evolution.

Pattern statements have the form::

    PATTERN <name> WHEN <expr> EMIT <complex-event-name>

where ``<expr>`` is one of::

    <eventKind>(field op literal, ...)      a single-event filter
    SEQ(expr, expr, ...)                    in order, timestamps increasing
    AND(expr, expr, ...)                    all branches, any interleaving
    OR(expr, expr, ...)                     any one branch
    WITHIN <seconds> expr                   bounded timestamp span

with ``op`` one of ``=  !=  <  >  within_m``. The ``within_m`` operator is
spatial: it accepts when the event's coordinate lies within the given
number of meters of the previous location-bearing constituent already in
the partial match (it never accepts as the first located constituent).

Match semantics (the brute-force test oracle mirrors these exactly):

* A match binds a subsequence of the ingested stream to the pattern's
  filters. Arrival order is stream order.
* Each event's *effective time* is its observation timestamp; kinds that
  carry none (activation requests, map traffic) inherit the stream clock,
  i.e. the most recent observation time seen, or the epoch before any.
* ``SEQ`` children bind consecutive slices of the match; every timed event
  of a later child must be strictly after every timed event of earlier
  children.
* ``WITHIN d`` accepts when the span max-min over the match's timed
  constituents is at most ``d`` seconds; partials exceeding it are pruned.
* A complex event is emitted once per distinct matching subsequence, when
  its last event arrives; ``detected_at`` is the latest constituent time.

Per-pattern partial-match state is capped (oldest dropped first, counted),
so the engine degrades predictably under hostile input rates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime

from . import events as ev
from . import geo

EPOCH = ev.Timestamp(datetime(1970, 1, 1))

DEFAULT_PARTIAL_CAP = 10_000


class MatchingError(Exception):
    pass


class PatternSyntaxError(MatchingError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownField(MatchingError):
    def __init__(self, fieldname: str, kind: str):
        super().__init__(f"event kind {kind!r} has no field {fieldname!r}")
        self.field = fieldname
        self.kind = kind


class DuplicateName(MatchingError):
    pass


class UnknownPattern(MatchingError):
    pass


# ---------------------------------------------------------------------------
# Event field access


_FIELDS = {
    "locationEvent": {
        "id": lambda e: e.id.email,
        "latitude": lambda e: e.where.latitude,
        "longitude": lambda e: e.where.longitude,
    },
    "hearsayRequest": {"id": lambda e: e.id.email, "activate": lambda e: e.activate},
    "radarRequest": {"id": lambda e: e.id.email, "activate": lambda e: e.activate},
    "trailRequest": {"id": lambda e: e.id.email, "activate": lambda e: e.activate},
    "hearsaySubmission": {
        "sender_id": lambda e: e.sender.id.email,
        "receiver_id": lambda e: e.receiver.id.email,
        "message": lambda e: e.message,
    },
    "hearsayDelivery": {
        "id": lambda e: e.target.email,
        "sender_id": lambda e: e.sender.id.email,
        "receiver_id": lambda e: e.receiver.id.email,
        "message": lambda e: e.message,
    },
    "radarResponse": {
        "id": lambda e: e.target.email,
        "subject_id": lambda e: e.location.id.email,
        "latitude": lambda e: e.location.where.latitude,
        "longitude": lambda e: e.location.where.longitude,
    },
    "trailSubmission": {
        "id": lambda e: e.trail[0].id.email,
        "length": lambda e: len(e.trail),
    },
    "trailsResponse": {
        "id": lambda e: e.target.email,
        "length": lambda e: len(e.trail),
    },
    "mapRequest": {
        "id": lambda e: e.id.email,
        "zoom": lambda e: e.zoom,
        "latitude": lambda e: e.coord.latitude,
        "longitude": lambda e: e.coord.longitude,
    },
    "mapResponse": {
        "id": lambda e: e.target.email,
        "zoom": lambda e: e.view.zoom,
        "url": lambda e: e.view.url,
    },
}


def event_coordinate(e: ev.Event) -> ev.GeoCoord | None:
    """The single coordinate an event carries, if any (receiver side for
    hearsay, first point for trails)."""
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


def event_time(e: ev.Event) -> ev.Timestamp | None:
    """Observation time of an event; None for kinds carrying no time."""
    if isinstance(e, ev.LocationEvent):
        return e.observed_at
    if isinstance(e, (ev.HearsaySubmission, ev.HearsayDelivery)):
        return e.receiver.observed_at
    if isinstance(e, ev.RadarResponse):
        return e.location.observed_at
    if isinstance(e, (ev.TrailSubmission, ev.TrailsResponse)):
        return max(p.observed_at for p in e.trail)
    return None


def _has_field(kind: str, name: str) -> bool:
    if name == "where":
        return kind in (
            "locationEvent", "hearsaySubmission", "hearsayDelivery",
            "radarResponse", "mapRequest", "trailSubmission", "trailsResponse",
        )
    return name in _FIELDS.get(kind, {})


# ---------------------------------------------------------------------------
# Pattern AST


@dataclass(frozen=True)
class Predicate:
    fieldname: str
    op: str  # "=", "!=", "<", ">", "within_m"
    literal: object


@dataclass(frozen=True)
class Filter:
    kind: str
    predicates: tuple = ()


@dataclass(frozen=True)
class Seq:
    children: tuple = ()


@dataclass(frozen=True)
class And:
    children: tuple = ()


@dataclass(frozen=True)
class Or:
    children: tuple = ()


@dataclass(frozen=True)
class Within:
    seconds: float = 0.0
    child: object = None


@dataclass(frozen=True)
class PatternSpec:
    name: str
    expr: object
    emit: str


@dataclass(frozen=True)
class ComplexEvent:
    name: str
    constituents: tuple
    detected_at: ev.Timestamp


# ---------------------------------------------------------------------------
# Pattern grammar


_TOKEN_RX = re.compile(
    r"""\s*(?:
        (?P<string>"[^"]*")
      | (?P<number>-?\d+(?:\.\d+)?)
      | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<punct>!=|[(),=<>])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RX.match(text, pos)
        if not m or m.start() != pos:
            raise PatternSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def _next(self):
        tok = self._peek()
        self.i += 1
        return tok

    def _expect_word(self, word: str):
        kind, value, pos = self._next()
        if kind != "word" or value != word:
            raise PatternSyntaxError(f"expected {word!r}, found {value!r}", pos)

    def _expect_punct(self, punct: str):
        kind, value, pos = self._next()
        if kind != "punct" or value != punct:
            raise PatternSyntaxError(f"expected {punct!r}, found {value!r}", pos)

    def parse_pattern(self) -> PatternSpec:
        self._expect_word("PATTERN")
        kind, name, pos = self._next()
        if kind != "word":
            raise PatternSyntaxError("expected pattern name", pos)
        self._expect_word("WHEN")
        expr = self.parse_expr()
        self._expect_word("EMIT")
        kind, emit, pos = self._next()
        if kind != "word":
            raise PatternSyntaxError("expected complex-event name", pos)
        kind, value, pos = self._peek()
        if kind is not None:
            raise PatternSyntaxError(f"trailing input {value!r}", pos)
        return PatternSpec(name, expr, emit)

    def parse_expr(self):
        kind, value, pos = self._next()
        if kind != "word":
            raise PatternSyntaxError(f"expected expression, found {value!r}", pos)
        if value == "WITHIN":
            nkind, nvalue, npos = self._next()
            if nkind != "number":
                raise PatternSyntaxError("WITHIN requires a duration in seconds", npos)
            seconds = float(nvalue)
            if seconds <= 0:
                raise PatternSyntaxError("WITHIN duration must be positive", npos)
            return Within(seconds, self.parse_expr())
        if value in ("SEQ", "AND", "OR"):
            children = self._parse_child_list(value, pos)
            cls = {"SEQ": Seq, "AND": And, "OR": Or}[value]
            return cls(tuple(children))
        if value in _FIELDS:
            return self._parse_filter(value)
        raise PatternSyntaxError(f"unknown event kind or operator {value!r}", pos)

    def _parse_child_list(self, combinator: str, at: int) -> list:
        self._expect_punct("(")
        children = [self.parse_expr()]
        while True:
            kind, value, pos = self._next()
            if kind == "punct" and value == ")":
                break
            if kind == "punct" and value == ",":
                children.append(self.parse_expr())
                continue
            raise PatternSyntaxError(f"expected ',' or ')', found {value!r}", pos)
        if len(children) < 2:
            raise PatternSyntaxError(f"{combinator} requires at least two children", at)
        return children

    def _parse_filter(self, kind_name: str) -> Filter:
        self._expect_punct("(")
        predicates = []
        nkind, nvalue, _ = self._peek()
        if nkind == "punct" and nvalue == ")":
            self._next()
            return Filter(kind_name, ())
        while True:
            predicates.append(self._parse_predicate(kind_name))
            kind, value, pos = self._next()
            if kind == "punct" and value == ")":
                break
            if not (kind == "punct" and value == ","):
                raise PatternSyntaxError(f"expected ',' or ')', found {value!r}", pos)
        return Filter(kind_name, tuple(predicates))

    def _parse_predicate(self, kind_name: str) -> Predicate:
        kind, fieldname, pos = self._next()
        if kind != "word":
            raise PatternSyntaxError("expected field name", pos)
        okind, op, opos = self._next()
        if okind == "punct" and op in ("=", "!=", "<", ">"):
            pass
        elif okind == "word" and op == "within_m":
            pass
        else:
            raise PatternSyntaxError(f"expected comparison operator, found {op!r}", opos)
        if not _has_field(kind_name, fieldname):
            raise UnknownField(fieldname, kind_name)
        if op == "within_m" and fieldname != "where":
            raise PatternSyntaxError("within_m applies to the 'where' field", opos)
        if op != "within_m" and fieldname == "where":
            raise PatternSyntaxError("'where' supports only within_m", opos)
        vkind, vvalue, vpos = self._next()
        if vkind == "string":
            literal: object = vvalue[1:-1]
        elif vkind == "number":
            literal = float(vvalue)
        elif vkind == "word" and vvalue in ("true", "false"):
            literal = vvalue == "true"
        else:
            raise PatternSyntaxError(f"expected literal, found {vvalue!r}", vpos)
        if op == "within_m" and not isinstance(literal, float):
            raise PatternSyntaxError("within_m requires a distance in meters", vpos)
        return Predicate(fieldname, op, literal)


def parse_pattern(text: str) -> PatternSpec:
    return _Parser(text).parse_pattern()


def parse_pattern_file(text: str) -> list:
    """One PATTERN statement per line; ``#`` starts a comment."""
    specs = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            specs.append(parse_pattern(line))
    return specs


# ---------------------------------------------------------------------------
# Predicate evaluation


def _eval_basic_predicate(pred: Predicate, e: ev.Event, kind: str) -> bool:
    value = _FIELDS[kind][pred.fieldname](e)
    lit = pred.literal
    if pred.op == "=":
        return value == lit
    if pred.op == "!=":
        return value != lit
    numeric = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not (numeric and isinstance(lit, float)):
        return False
    if pred.op == "<":
        return value < lit
    return value > lit


def check_filter(flt: Filter, e: ev.Event, prior_coords: list) -> bool:
    """Whether ``e`` passes the filter given the coordinates of already-bound
    constituents (in arrival order) for ``within_m`` evaluation."""
    if ev.event_kind(e) != flt.kind:
        return False
    for pred in flt.predicates:
        if pred.op == "within_m":
            here = event_coordinate(e)
            prev = next((c for c in reversed(prior_coords) if c is not None), None)
            if here is None or prev is None:
                return False
            if geo.haversine_m(here, prev) > pred.literal:
                return False
        elif not _eval_basic_predicate(pred, e, flt.kind):
            return False
    return True


# ---------------------------------------------------------------------------
# Incremental matcher state


@dataclass(frozen=True)
class _Entry:
    seq: int
    event: ev.Event
    time: ev.Timestamp  # effective time
    timed: bool
    coord: object


class _NodeState:
    __slots__ = ()

    def complete(self) -> bool:
        raise NotImplementedError

    def entries(self) -> tuple:
        raise NotImplementedError

    def feed(self, entry: _Entry, ctx: tuple) -> list:
        """Successor states that consume ``entry``; ``ctx`` is the root
        partial's already-bound entries in arrival order."""
        raise NotImplementedError

    def signature(self):
        raise NotImplementedError


class _FilterState(_NodeState):
    __slots__ = ("flt", "bound")

    def __init__(self, flt: Filter, bound: _Entry | None = None):
        self.flt = flt
        self.bound = bound

    def complete(self):
        return self.bound is not None

    def entries(self):
        return (self.bound,) if self.bound else ()

    def feed(self, entry, ctx):
        if self.bound is not None:
            return []
        prior_coords = [c.coord for c in ctx]
        if check_filter(self.flt, entry.event, prior_coords):
            return [_FilterState(self.flt, entry)]
        return []

    def signature(self):
        return ("F", self.bound.seq if self.bound else None)


def _merged_entries(children: tuple) -> tuple:
    merged = [e for c in children for e in c.entries()]
    merged.sort(key=lambda en: en.seq)
    return tuple(merged)


def _max_timed(entries_iter) -> ev.Timestamp | None:
    times = [en.time for en in entries_iter if en.timed]
    return max(times) if times else None


class _SeqState(_NodeState):
    __slots__ = ("spec", "children")

    def __init__(self, spec: Seq, children: tuple | None = None):
        self.spec = spec
        self.children = children if children is not None else tuple(
            _fresh(c) for c in spec.children
        )

    def complete(self):
        return all(c.complete() for c in self.children)

    def entries(self):
        return _merged_entries(self.children)

    def feed(self, entry, ctx):
        active = next((i for i, c in enumerate(self.children) if not c.complete()), None)
        if active is None:
            return []
        if entry.timed:
            bound = _max_timed(
                e for c in self.children[:active] for e in c.entries()
            )
            if bound is not None and not entry.time > bound:
                return []
        out = []
        for nxt in self.children[active].feed(entry, ctx):
            new_children = self.children[:active] + (nxt,) + self.children[active + 1:]
            out.append(_SeqState(self.spec, new_children))
        return out

    def signature(self):
        return ("S",) + tuple(c.signature() for c in self.children)


class _AndState(_NodeState):
    __slots__ = ("spec", "children")

    def __init__(self, spec: And, children: tuple | None = None):
        self.spec = spec
        self.children = children if children is not None else tuple(
            _fresh(c) for c in spec.children
        )

    def complete(self):
        return all(c.complete() for c in self.children)

    def entries(self):
        return _merged_entries(self.children)

    def feed(self, entry, ctx):
        out = []
        for i, child in enumerate(self.children):
            if child.complete():
                continue
            for nxt in child.feed(entry, ctx):
                out.append(
                    _AndState(self.spec, self.children[:i] + (nxt,) + self.children[i + 1:])
                )
        return out

    def signature(self):
        return ("A",) + tuple(c.signature() for c in self.children)


class _OrState(_NodeState):
    __slots__ = ("spec", "branch", "child")

    def __init__(self, spec: Or, branch: int | None = None, child=None):
        self.spec = spec
        self.branch = branch
        self.child = child

    def complete(self):
        return self.child is not None and self.child.complete()

    def entries(self):
        return self.child.entries() if self.child else ()

    def feed(self, entry, ctx):
        out = []
        if self.child is None:
            for i, spec_child in enumerate(self.spec.children):
                for nxt in _fresh(spec_child).feed(entry, ctx):
                    out.append(_OrState(self.spec, i, nxt))
        else:
            for nxt in self.child.feed(entry, ctx):
                out.append(_OrState(self.spec, self.branch, nxt))
        return out

    def signature(self):
        return ("O", self.branch, self.child.signature() if self.child else None)


class _WithinState(_NodeState):
    __slots__ = ("spec", "child")

    def __init__(self, spec: Within, child=None):
        self.spec = spec
        self.child = child if child is not None else _fresh(spec.child)

    def complete(self):
        return self.child.complete()

    def entries(self):
        return self.child.entries()

    def span_ok(self) -> bool:
        times = [en.time for en in self.entries() if en.timed]
        if len(times) < 2:
            return True
        return (max(times).dt - min(times).dt).total_seconds() <= self.spec.seconds

    def feed(self, entry, ctx):
        return [_WithinState(self.spec, nxt) for nxt in self.child.feed(entry, ctx)]

    def signature(self):
        return ("W", self.child.signature())


def _fresh(expr) -> _NodeState:
    if isinstance(expr, Filter):
        return _FilterState(expr)
    if isinstance(expr, Seq):
        return _SeqState(expr)
    if isinstance(expr, And):
        return _AndState(expr)
    if isinstance(expr, Or):
        return _OrState(expr)
    if isinstance(expr, Within):
        return _WithinState(expr)
    raise TypeError(f"not a pattern expression: {expr!r}")


def _spans_ok(state: _NodeState) -> bool:
    """Every WITHIN node over the state's current entries holds its bound."""
    if isinstance(state, _WithinState):
        return state.span_ok() and _spans_ok(state.child)
    if isinstance(state, (_SeqState, _AndState)):
        return all(_spans_ok(c) for c in state.children)
    if isinstance(state, _OrState):
        return state.child is None or _spans_ok(state.child)
    return True


# ---------------------------------------------------------------------------
# Engine


@dataclass
class EngineStats:
    ingested: int = 0
    matched: int = 0
    invalid: int = 0
    pruned_partials: int = 0
    dropped_partials: int = 0
    per_pattern: dict = field(default_factory=dict)


class _ActivePattern:
    __slots__ = ("pattern_id", "spec", "partials")

    def __init__(self, pattern_id: int, spec: PatternSpec):
        self.pattern_id = pattern_id
        self.spec = spec
        self.partials: list[_NodeState] = []


class Engine:
    """Single-consumer matching engine over a stream of events."""

    def __init__(self, partial_cap: int = DEFAULT_PARTIAL_CAP):
        self.partial_cap = partial_cap
        self._patterns: dict[int, _ActivePattern] = {}
        self._next_id = 0
        self._seq = 0
        self._stream_clock = EPOCH
        self._stats = EngineStats()

    # -- pattern evolution

    def add_pattern(self, spec: PatternSpec) -> int:
        if any(p.spec.name == spec.name for p in self._patterns.values()):
            raise DuplicateName(spec.name)
        self._next_id += 1
        self._patterns[self._next_id] = _ActivePattern(self._next_id, spec)
        self._stats.per_pattern.setdefault(spec.name, 0)
        return self._next_id

    def remove_pattern(self, pattern_id: int) -> None:
        if pattern_id not in self._patterns:
            raise UnknownPattern(str(pattern_id))
        del self._patterns[pattern_id]  # in-flight partials discarded with it

    def active_patterns(self) -> tuple:
        return tuple((p.pattern_id, p.spec) for p in self._patterns.values())

    # -- ingestion

    def ingest(self, e: ev.Event) -> list:
        if ev.validate(e):
            self._stats.invalid += 1
            return []
        self._stats.ingested += 1
        self._seq += 1
        t = event_time(e)
        if t is not None:
            self._stream_clock = t
            timed = True
        else:
            t = self._stream_clock
            timed = False
        entry = _Entry(self._seq, e, t, timed, event_coordinate(e))

        emitted = []
        for active in self._patterns.values():
            emitted.extend(self._advance(active, entry))
        self._stats.matched += len(emitted)
        return emitted

    def _advance(self, active: _ActivePattern, entry: _Entry) -> list:
        emitted = []
        emitted_keys = set()
        new_partials = []
        new_signatures = set()
        for state in active.partials + [_fresh(active.spec.expr)]:
            ctx = state.entries()
            for nxt in state.feed(entry, ctx):
                if not _spans_ok(nxt):
                    self._stats.pruned_partials += 1
                    continue
                if nxt.complete():
                    key = tuple(en.seq for en in nxt.entries())
                    if key in emitted_keys:
                        continue
                    emitted_keys.add(key)
                    entries = nxt.entries()
                    timed = [en.time for en in entries if en.timed]
                    detected = max(timed) if timed else entry.time
                    emitted.append(
                        ComplexEvent(
                            name=active.spec.emit,
                            constituents=tuple(en.event for en in entries),
                            detected_at=detected,
                        )
                    )
                    self._stats.per_pattern[active.spec.name] = (
                        self._stats.per_pattern.get(active.spec.name, 0) + 1
                    )
                else:
                    sig = nxt.signature()
                    if sig not in new_signatures:
                        new_signatures.add(sig)
                        new_partials.append(nxt)
        active.partials.extend(new_partials)
        overflow = len(active.partials) - self.partial_cap
        if overflow > 0:
            del active.partials[:overflow]  # oldest first
            self._stats.dropped_partials += overflow
        return emitted

    # -- observability

    def stats(self) -> EngineStats:
        s = self._stats
        return EngineStats(
            ingested=s.ingested,
            matched=s.matched,
            invalid=s.invalid,
            pruned_partials=s.pruned_partials,
            dropped_partials=s.dropped_partials,
            per_pattern=dict(s.per_pattern),
        )


# ---------------------------------------------------------------------------
# Pipeline integration


def _register_component():
    from .pipeline import Component, Message, register_component_type

    class MatchingComponent(Component):
        """Runs an engine over the event stream flowing through a pipeline;
        complex events leave on ``out`` as structured messages carrying the
        emitted name and constituent documents. Patterns come from the
        ``patterns`` config entry (a pattern file path) or are added to
        ``self.engine`` directly."""

        inputs = ("in",)
        outputs = ("out",)

        def __init__(self, name, config, env):
            super().__init__(name, config, env)
            self.engine = Engine(
                partial_cap=int(config.get("partial_cap", DEFAULT_PARTIAL_CAP))
            )
            path = config.get("patterns")
            if path:
                with open(path, "r", encoding="utf-8") as fh:
                    for spec in parse_pattern_file(fh.read()):
                        self.engine.add_pattern(spec)

        def on_message(self, port, msg):
            event = msg.payload
            if msg.kind != "event":
                try:
                    event = ev.parse_event(str(msg.payload))
                except ev.EventError:
                    return
            for ce in self.engine.ingest(event):
                self.emit("out", Message.event(ce))

    try:
        register_component_type("MatchingEngine", MatchingComponent)
    except Exception:
        pass


_register_component()
