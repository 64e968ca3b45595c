"""Clock sources used by the transport and the benchmark harness.

A clock is any zero-argument callable returning monotonic seconds.  The
default is the wall clock (``time.perf_counter``).  ``VirtualClock`` is a
deterministic replacement: every read advances simulated time by a fixed
tick, which models "reading the clock costs one unit of work" and makes
latency experiments exactly reproducible.
"""

from __future__ import annotations

import time
from typing import Callable

Clock = Callable[[], float]

wall_clock: Clock = time.perf_counter


class VirtualClock:
    """Deterministic clock whose reads advance time by a fixed tick.

    ``peek()`` returns the current time without advancing it; ``advance()``
    jumps forward without a read.  The tick defaults to 0.1 microseconds.
    """

    __slots__ = ("tick", "_now")

    def __init__(self, tick: float = 1e-7, start: float = 0.0) -> None:
        if tick <= 0.0:
            raise ValueError("tick must be positive")
        self.tick = tick
        self._now = start

    def __call__(self) -> float:
        self._now += self.tick
        return self._now

    def peek(self) -> float:
        return self._now

    def advance(self, dt: float) -> None:
        if dt < 0.0:
            raise ValueError("cannot move a clock backwards")
        self._now += dt

    def __repr__(self) -> str:  # pragma: no cover
        return f"VirtualClock(now={self._now!r}, tick={self.tick!r})"
