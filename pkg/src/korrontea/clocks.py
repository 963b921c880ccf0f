"""Logical and physical clocks, and a deterministic virtual-time timer queue.

A logical clock numbers the information units of one produced flow; a local
physical clock stamps the synchronous slices of one site.  The virtual
timeline backs the delay timers of the mixed and soft synchronization
policies so simulated runs are reproducible tick for tick.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Callable, Optional

from .errors import TimeReversal
from .model import SiteId


class LogicalClock:
    """Counter producing the sequence numbers of one flow, starting at 1."""

    def __init__(self):
        self.counter = 0

    def next_sequence_number(self) -> int:
        self.counter += 1
        return self.counter


class LocalPhysicalClock:
    """Per-site source of strictly increasing integer time stamps.

    The clock tracks an underlying tick value (advanced explicitly in
    simulation, or read from a monotonic source in live mode, scaled by the
    shared rate `rate_k`).  Reads never repeat: when the underlying value
    has not moved past the last returned stamp, the read is bumped by one.
    """

    def __init__(
        self,
        site: SiteId,
        start: int = 0,
        rate_k: Fraction = Fraction(1),
        source: Optional[Callable[[], float]] = None,
    ):
        if rate_k <= 0:
            raise ValueError("rate_k must be positive")
        self.site = site
        self.rate_k = rate_k
        self._source = source
        self._origin = source() if source is not None else None
        self._current = start
        self._last_returned: Optional[int] = None

    def advance(self, delta: int) -> None:
        """Move the underlying simulated value forward by `delta` ticks."""
        if delta < 0:
            raise TimeReversal("physical clocks only move forward")
        if self._source is not None:
            raise ValueError("cannot advance a source-backed clock")
        self._current += delta

    def now(self) -> int:
        underlying = self._current
        if self._source is not None:
            elapsed = self._source() - self._origin
            underlying = self._current + int(elapsed * self.rate_k)
        stamp = underlying
        if self._last_returned is not None and stamp <= self._last_returned:
            stamp = self._last_returned + 1
        self._last_returned = stamp
        return stamp


class VirtualTimeline:
    """Deterministic timer queue over integer virtual time.

    Timers fire in non-decreasing fire-tick order; ties break by creation
    order.  Replaying the same schedule/advance sequence always yields the
    same fired sequence.
    """

    def __init__(self, start: int = 0):
        self.now = start
        self._next_id = 0
        self._pending: list[tuple[int, int]] = []  # (fire_at, timer_id)

    def schedule(self, delay: int) -> int:
        """Register a timer `delay` ticks from now; returns its id."""
        if delay < 0:
            raise ValueError("delay must be non-negative")
        timer_id = self._next_id
        self._next_id += 1
        heapq.heappush(self._pending, (self.now + delay, timer_id))
        return timer_id

    def next_fire(self) -> Optional[int]:
        """Tick of the earliest pending timer, or None when idle."""
        return self._pending[0][0] if self._pending else None

    def advance(self, to: int) -> list[int]:
        """Move time forward to `to`, returning the ids of fired timers."""
        if to < self.now:
            raise TimeReversal(f"cannot advance from {self.now} back to {to}")
        fired: list[int] = []
        while self._pending and self._pending[0][0] <= to:
            _, timer_id = heapq.heappop(self._pending)
            fired.append(timer_id)
        self.now = to
        return fired

    def __len__(self) -> int:
        return len(self._pending)
