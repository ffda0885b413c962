"""Deterministic discrete-event core."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable


@dataclass(order=True)
class SimEvent:
    time: int
    node: int
    order: int
    kind: str = field(compare=False)
    handler: Callable[..., Any] = field(compare=False, repr=False)
    payload: tuple = field(compare=False, default=())


class Engine:
    """Event queue ordered by (time, node id, insertion order).

    Times are integer nanoseconds so ordering never depends on floating
    point rounding.
    """

    def __init__(self):
        self._heap: list[tuple[int, int, int, SimEvent]] = []
        self._counter = itertools.count()
        self.now = 0
        self.processed = 0

    def schedule(self, time_ns: int, node: int, kind: str, handler: Callable[..., Any], *payload) -> SimEvent:
        if time_ns < self.now:
            raise ValueError(f"event {kind} at {time_ns} ns is in the past (now {self.now} ns)")
        ev = SimEvent(int(time_ns), node, next(self._counter), kind, handler, payload)
        heapq.heappush(self._heap, (ev.time, node, ev.order, ev))
        return ev

    def run(self, until_ns: int | None = None, stop: Callable[[], bool] | None = None) -> None:
        while self._heap:
            if until_ns is not None and self._heap[0][0] > until_ns:
                break
            ev = heapq.heappop(self._heap)[3]
            self.now = ev.time
            ev.handler(*ev.payload)
            self.processed += 1
            if stop is not None and stop():
                break
        if until_ns is not None and self.now < until_ns and not self._heap:
            self.now = until_ns

    def __len__(self) -> int:
        return len(self._heap)
