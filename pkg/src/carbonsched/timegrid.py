"""Uniform simulation time grid and timestamp/slot conversions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of `n_slots` slots of `slot_minutes` starting at `start`.

    Slot k covers the half-open interval [start + k*dt, start + (k+1)*dt).
    """

    start: datetime
    slot_minutes: int
    n_slots: int

    def __post_init__(self):
        if self.slot_minutes <= 0:
            raise ValueError("slot_minutes must be positive")
        if self.n_slots < 1:
            raise ValueError("n_slots must be >= 1")

    @property
    def slot_hours(self) -> float:
        return self.slot_minutes / 60.0

    @property
    def end(self) -> datetime:
        return self.start + timedelta(minutes=self.slot_minutes * self.n_slots)

    def timestamps(self) -> list[datetime]:
        dt = timedelta(minutes=self.slot_minutes)
        return [self.start + k * dt for k in range(self.n_slots)]

    def contains(self, ts: datetime) -> bool:
        return self.start <= ts <= self.end

    def _offset_slots(self, ts: datetime) -> float:
        return (ts - self.start).total_seconds() / (self.slot_minutes * 60.0)

    def ceil_index(self, ts: datetime) -> int:
        """Smallest slot index whose boundary is at or after `ts`."""
        return math.ceil(self._offset_slots(ts) - 1e-9)

    def floor_index(self, ts: datetime) -> int:
        """Largest slot index whose boundary is at or before `ts`."""
        return math.floor(self._offset_slots(ts) + 1e-9)
