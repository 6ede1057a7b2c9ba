"""Pump schedules in units of the oscillation threshold."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PumpSchedule:
    """Step (``abrupt``) or linear-ramp (``linear``) pump rate.

    ``ramp`` is measured in round trips for the single-mode map and in
    ``1/gamma`` for the multimode integrator.
    """

    kind: str = "abrupt"
    p_start: float = 0.0
    p_end: float = 2.7
    ramp: float = 1.0

    def __post_init__(self):
        if self.kind not in ("abrupt", "linear"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.p_start < 0 or self.p_end < 0:
            raise ValueError("pump rates must be non-negative")
        if self.kind == "linear" and self.ramp < 1:
            raise ValueError("linear schedule needs ramp >= 1")

    @classmethod
    def abrupt(cls, p: float) -> "PumpSchedule":
        return cls("abrupt", p, p, 1.0)

    @classmethod
    def linear(cls, p_start: float, p_end: float, ramp: float) -> "PumpSchedule":
        return cls("linear", p_start, p_end, ramp)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p_start": self.p_start, "p_end": self.p_end, "ramp": self.ramp}

    @classmethod
    def from_dict(cls, doc: dict) -> "PumpSchedule":
        return cls(**doc)


def evaluate_schedule(schedule: PumpSchedule, t: float) -> float:
    if schedule.kind == "abrupt":
        return schedule.p_end
    frac = min(t / schedule.ramp, 1.0)
    return schedule.p_start + (schedule.p_end - schedule.p_start) * frac
