"""Event schedules in 1+1 Minkowski spacetime (c = 1) and Bell-test loophole audits."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError, InvariantError
from .reports import FAIL, NOT_APPLICABLE, PASS, CheckResult

SPACELIKE = "spacelike"
TIMELIKE = "timelike"
LIGHTLIKE = "lightlike"

LIGHTLIKE_TOL = 1e-12

LABELS = ("source", "choice_1", "choice_2", "measure_1", "measure_2", "record_1", "record_2")
REQUIRED_LABELS = LABELS[:5]

FREEDOM_OF_CHOICE_NOTE = (
    "freedom of choice is operationalized as each choice event being spacelike "
    "separated from the source emission event; other criteria are possible"
)


@dataclass(frozen=True)
class Event:
    t: float
    x: float
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.x)):
            raise InvariantError(f"event {self.label!r} has non-finite coordinates")
        if self.label and self.label not in LABELS:
            raise InvariantError(f"unknown event label {self.label!r}")

    def to_dict(self) -> dict:
        return {"t": self.t, "x": self.x}


def interval(e1: Event, e2: Event) -> float:
    """(dt)^2 - (dx)^2; positive is timelike."""
    return (e2.t - e1.t) ** 2 - (e2.x - e1.x) ** 2


def interval_class(e1: Event, e2: Event) -> str:
    s = interval(e1, e2)
    if abs(s) <= LIGHTLIKE_TOL:
        return LIGHTLIKE
    return TIMELIKE if s > 0 else SPACELIKE


@dataclass(frozen=True)
class ExperimentSchedule:
    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        labels = [e.label for e in events]
        dupes = {l for l in labels if labels.count(l) > 1}
        if dupes:
            raise InvariantError(f"more than one event for labels {sorted(dupes)}")
        missing = [l for l in REQUIRED_LABELS if l not in labels]
        if missing:
            raise InvariantError(f"schedule is missing events {missing}")
        object.__setattr__(self, "events", events)

    def __getitem__(self, label: str) -> Event:
        for e in self.events:
            if e.label == label:
                return e
        raise KeyError(label)

    def has(self, label: str) -> bool:
        return any(e.label == label for e in self.events)

    def moved(self, label: str, t: float | None = None, x: float | None = None) -> ExperimentSchedule:
        """Copy with one event relocated (or added, for record events)."""
        events = [e for e in self.events if e.label != label]
        old = self[label] if self.has(label) else None
        if old is None and (t is None or x is None):
            raise InvalidInputError(f"new event {label!r} needs both coordinates")
        events.append(Event(old.t if t is None else t, old.x if x is None else x, label))
        return ExperimentSchedule(tuple(sorted(events, key=lambda e: LABELS.index(e.label))))

    def transformed(self, fn) -> ExperimentSchedule:
        """Apply fn(t, x) -> (t', x') to every event."""
        return ExperimentSchedule(tuple(Event(*fn(e.t, e.x), e.label) for e in self.events))

    def to_dict(self) -> dict:
        return {e.label: e.to_dict() for e in self.events}

    @classmethod
    def from_dict(cls, d) -> ExperimentSchedule:
        events = []
        for label, coords in d.items():
            if isinstance(coords, dict):
                t, x = coords["t"], coords["x"]
            else:
                t, x = coords
            events.append(Event(float(t), float(x), label))
        return cls(tuple(events))


def reference_schedule(half_separation: float = 10.0, measure_time: float = 5.0,
                    choice_time: float = 4.9) -> ExperimentSchedule:
    """Source at the origin, wings at x = -/+ half_separation, records at the measurements."""
    L = half_separation
    return ExperimentSchedule((
        Event(0.0, 0.0, "source"),
        Event(choice_time, -L, "choice_1"),
        Event(choice_time, L, "choice_2"),
        Event(measure_time, -L, "measure_1"),
        Event(measure_time, L, "measure_2"),
        Event(measure_time, -L, "record_1"),
        Event(measure_time, L, "record_2"),
    ))


def _require_spacelike(s: ExperimentSchedule, a: str, b: str, messages: list, pairs: dict):
    kind = interval_class(s[a], s[b])
    pairs[f"{a}/{b}"] = kind
    if kind != SPACELIKE:
        messages.append(f"({a}, {b}) is {kind}, not spacelike")


def audit_locality(s: ExperimentSchedule) -> CheckResult:
    messages, pairs = [], {}
    for a, b in (("measure_1", "measure_2"), ("choice_1", "measure_2"), ("choice_2", "measure_1")):
        _require_spacelike(s, a, b, messages, pairs)
    return CheckResult("locality", FAIL if messages else PASS, tuple(messages), {"pairs": pairs})


def audit_collapse_locality(s: ExperimentSchedule) -> CheckResult:
    """Records spacelike from each other; ``slack`` is how far either may be delayed."""
    if not (s.has("record_1") and s.has("record_2")):
        return CheckResult("collapse_locality", NOT_APPLICABLE,
                           ("schedule has no record_1/record_2 events",))
    r1, r2 = s["record_1"], s["record_2"]
    slack = abs(r2.x - r1.x) - abs(r2.t - r1.t)
    messages, pairs = [], {}
    _require_spacelike(s, "record_1", "record_2", messages, pairs)
    return CheckResult("collapse_locality", FAIL if messages else PASS, tuple(messages),
                       {"pairs": pairs, "slack": slack})


def audit_freedom_of_choice(s: ExperimentSchedule) -> CheckResult:
    messages, pairs = [], {}
    for wing in (1, 2):
        kind = interval_class(s[f"choice_{wing}"], s["source"])
        pairs[f"choice_{wing}/source"] = kind
        if kind != SPACELIKE:
            messages.append(f"wing {wing}: choice_{wing} is {kind} from the source, not spacelike")
    return CheckResult("freedom_of_choice", FAIL if messages else PASS, tuple(messages),
                       {"pairs": pairs, "criterion": FREEDOM_OF_CHOICE_NOTE})


AUDITS = {
    "locality": audit_locality,
    "collapse_locality": audit_collapse_locality,
    "freedom_of_choice": audit_freedom_of_choice,
}


def run_audits(s: ExperimentSchedule, names=tuple(AUDITS)) -> dict:
    unknown = set(names) - set(AUDITS)
    if unknown:
        raise InvalidInputError(f"unknown audits {sorted(unknown)}")
    return {name: AUDITS[name](s) for name in names}
