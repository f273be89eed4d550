from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class Event:
    kind: str
    data: dict[str, Any] = field(default_factory=dict)


@dataclass
class Report:
    title: str
    events: list[Event] = field(default_factory=list)
    passed: bool = True

    def failures(self) -> list[Event]:
        return [event for event in self.events if event.kind == "check" and not event.data.get("ok", True)]


def emit(report: Report, kind: str, **data: Any) -> Event:
    event = Event(kind=kind, data=data)
    report.events.append(event)
    return event


def check(report: Report, name: str, ok: bool, **data: Any) -> bool:
    """Record an asserted property; a failure marks the whole report as failed."""
    emit(report, "check", name=name, ok=bool(ok), **data)
    if not ok:
        report.passed = False
    return bool(ok)


class ExperimentError(ValueError):
    pass
