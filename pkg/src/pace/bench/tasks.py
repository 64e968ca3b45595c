"""Dummy tasks for latency measurement.

A dummy task simulates an offloaded job that finishes at a preset deadline:
its poll hook reads the clock once, and when the deadline has passed it
records the observed latency (clock reading minus deadline), decrements a
shared countdown, and retires.  Latency samples are therefore always
non-negative.
"""

from __future__ import annotations

import time
from typing import Optional

from ..clock import Clock
from ..engine import DONE, PENDING, Engine, Stream


class CountDown:
    """Shared counter the wait loop spins on, one owner thread at a time."""

    __slots__ = ("value",)

    def __init__(self, value: int) -> None:
        self.value = value


def start_dummy_task(engine: Engine, stream: Optional[Stream], clock: Clock,
                     deadline: float, sink: list[float],
                     counter: CountDown) -> None:
    """Register a plain dummy task; exactly one clock read per poll."""
    append = sink.append

    def poll(task):
        now = clock()
        if now >= deadline:
            append(now - deadline)
            counter.value -= 1
            return DONE
        return PENDING

    engine.async_start(poll, None, stream)


def start_busy_load_task(engine: Engine, stream: Optional[Stream],
                         clock: Clock, delay_s: float,
                         stop: CountDown) -> None:
    """Register a load task that busy-polls the clock for *delay_s* while
    pending, and retires once *stop* reaches zero."""

    def poll(task):
        if stop.value <= 0:
            return DONE
        end = clock() + delay_s
        while clock() < end:
            pass
        return PENDING

    engine.async_start(poll, None, stream)


def start_pausing_dummy_task(engine: Engine, stream: Optional[Stream],
                             clock: Clock, deadline: float,
                             sink: list[float], counter: CountDown,
                             pause_s: float) -> None:
    """Dummy task whose pending path waits briefly outside the interpreter.

    ``time.sleep`` releases the interpreter lock, so many progress threads
    genuinely overlap even on a machine with fewer cores than threads; a
    pure busy-poll would serialize all threads on the interpreter lock and
    measure scheduler rotation instead of progress behavior.
    """
    append = sink.append
    sleep = time.sleep

    def poll(task):
        now = clock()
        if now >= deadline:
            append(now - deadline)
            counter.value -= 1
            return DONE
        sleep(pause_s)
        return PENDING

    engine.async_start(poll, None, stream)
