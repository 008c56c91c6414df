"""Discrete-event engine: simulation clock, event queue and seeded RNG streams."""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable


class PastEvent(ValueError):
    """Raised when an event is scheduled before the current clock."""


class EventKind(IntEnum):
    PACKET_ARRIVAL = 0
    TRANSMISSION_END = 1
    TIMER = 2
    MEASUREMENT_TICK = 3


@dataclass(order=True, slots=True)
class Event:
    fire_time: float
    sequence_no: int
    kind: EventKind = field(compare=False, default=EventKind.TIMER)
    action: Callable[..., Any] | None = field(compare=False, default=None)
    args: tuple = field(compare=False, default=())
    cancelled: bool = field(compare=False, default=False)


class Simulator:
    """Single-threaded event loop.

    Events with the same ``fire_time`` fire in ``sequence_no`` order, which is
    the order in which they were scheduled unless the caller supplies its own
    sequence numbers.
    """

    def __init__(self, trace: bool = False):
        self.clock = 0.0
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self.events_fired = 0
        self.trace: list[tuple[float, int, int]] | None = [] if trace else None

    def next_sequence(self) -> int:
        return next(self._seq)

    def schedule(self, event: Event) -> Event:
        if event.fire_time < self.clock:
            raise PastEvent(
                f"event at t={event.fire_time} scheduled when clock={self.clock}"
            )
        heapq.heappush(self._queue, event)
        return event

    def at(self, fire_time: float, action: Callable[..., Any], *args,
           kind: EventKind = EventKind.TIMER) -> Event:
        """Convenience wrapper: build an Event with the next sequence number."""
        return self.schedule(Event(fire_time, next(self._seq), kind, action, args))

    def after(self, delay: float, action: Callable[..., Any], *args,
              kind: EventKind = EventKind.TIMER) -> Event:
        return self.at(self.clock + delay, action, *args, kind=kind)

    @staticmethod
    def cancel(event: Event) -> None:
        event.cancelled = True

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    def run_until(self, t_end: float) -> float:
        if t_end < self.clock:
            raise PastEvent(f"run_until({t_end}) is before clock={self.clock}")
        queue = self._queue
        trace = self.trace
        while queue and queue[0].fire_time <= t_end:
            event = heapq.heappop(queue)
            if event.cancelled:
                continue
            self.clock = event.fire_time
            self.events_fired += 1
            if trace is not None:
                trace.append((event.fire_time, event.sequence_no, int(event.kind)))
            if event.action is not None:
                event.action(*event.args)
        self.clock = t_end
        return self.clock


def substream(seed: int, *labels) -> random.Random:
    """Independent RNG stream derived from ``seed`` and a label path.

    String seeds are hashed with SHA-512 by ``random.Random``, so the stream does
    not depend on PYTHONHASHSEED.
    """
    key = ":".join(str(x) for x in (seed, *labels))
    return random.Random(key)
