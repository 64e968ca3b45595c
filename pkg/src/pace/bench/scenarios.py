"""The benchmark scenarios.

Every scenario runs one warm-up repetition (excluded from statistics),
then ``config.repetitions`` measured repetitions per sweep point, and
reports sample counts alongside the CSV rows.  With ``virtual=True`` the
single-threaded scenarios run against a deterministic virtual clock and
produce bit-identical output for a fixed config.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .. import request as rq
from ..clock import Clock, VirtualClock, wall_clock
from ..collective import allreduce_blocking, baseline_allreduce
from ..engine import DONE, PENDING, Engine
from ..transport import World
from .config import BenchConfig, ConfigError
from .stats import LatencyStats
from .tasks import (CountDown, start_busy_load_task, start_dummy_task,
                    start_pausing_dummy_task)


class BenchError(RuntimeError):
    """A benchmark invariant failed (for example the correctness gate)."""


@dataclass
class ScenarioResult:
    fieldnames: list[str]
    rows: list[tuple] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _sweep_powers(limit: int) -> list[int]:
    values = []
    n = 1
    while n <= limit:
        values.append(n)
        n *= 2
    return values


def _make_clock(virtual: bool) -> Clock:
    return VirtualClock() if virtual else wall_clock


POLL_DELAY_SWEEP_US = (0, 1, 2, 5, 10, 50)
THREAD_SWEEP = (1, 2, 4, 8)
# The pending path of a contention dummy task waits this long outside the
# interpreter lock; large enough that sleep granularity does not dominate
# the shared-vs-per-stream comparison on a small machine.
CONTENTION_POLL_PAUSE_S = 200e-6
CONTENTION_JITTER_SPAN_S = 1e-5


# -- pending tasks -------------------------------------------------------------


def measure_pending_once(clock: Clock, num_tasks: int,
                         duration_s: float) -> list[float]:
    """One repetition of the independent-dummy-task experiment."""
    engine = Engine()
    stream = engine.stream_create()
    sink: list[float] = []
    counter = CountDown(num_tasks)
    deadline = clock() + duration_s
    for _ in range(num_tasks):
        start_dummy_task(engine, stream, clock, deadline, sink, counter)
    progress = engine.stream_progress
    while counter.value > 0:
        progress(stream)
    return sink


def bench_pending_tasks(config: BenchConfig,
                        virtual: bool = False) -> ScenarioResult:
    """Latency versus the number of independent pending tasks."""
    result = ScenarioResult(["num_pending", "mean_latency_us",
                             "p99_latency_us"])
    for n in _sweep_powers(config.num_tasks):
        stats = LatencyStats()
        for rep in range(config.repetitions + 1):
            samples = measure_pending_once(_make_clock(virtual), n,
                                           config.task_duration_s)
            if rep > 0:  # repetition 0 is the warm-up
                stats.extend(samples)
        result.rows.append((n, stats.mean_us, stats.p99_us))
        result.notes.append(f"num_pending={n}: {stats.count} samples")
    return result


# -- poll-function overhead ------------------------------------------------------


def measure_poll_overhead_once(clock: Clock, delay_s: float,
                               duration_s: float, num_probes: int,
                               rng: random.Random,
                               probe_offsets: Optional[list[float]] = None
                               ) -> list[float]:
    """Ten always-pending tasks busy-poll the clock for *delay_s* each pass;
    probe tasks measure how quickly their deadlines are observed."""
    engine = Engine()
    stream = engine.stream_create()
    sink: list[float] = []
    counter = CountDown(num_probes)
    for _ in range(10):
        start_busy_load_task(engine, stream, clock, delay_s, counter)
    base = clock() + duration_s
    span = 10 * delay_s + 5e-5
    for i in range(num_probes):
        if probe_offsets is not None:
            offset = probe_offsets[i]
        else:
            offset = rng.uniform(0.0, 4.0 * span)
        start_dummy_task(engine, stream, clock, base + offset, sink, counter)
    progress = engine.stream_progress
    while counter.value > 0:
        progress(stream)
    # One extra pass retires the load tasks now that the countdown is zero.
    progress(stream)
    return sink


def bench_poll_overhead(config: BenchConfig,
                        virtual: bool = False) -> ScenarioResult:
    """Event-response latency as the per-poll busy-wait grows."""
    result = ScenarioResult(["poll_delay_us", "mean_latency_us",
                             "p99_latency_us"])
    rng = random.Random(config.seed)
    for delay_us in POLL_DELAY_SWEEP_US:
        stats = LatencyStats()
        for rep in range(config.repetitions + 1):
            samples = measure_poll_overhead_once(
                _make_clock(virtual), delay_us * 1e-6,
                config.task_duration_s, num_probes=20, rng=rng)
            if rep > 0:
                stats.extend(samples)
        result.rows.append((delay_us, stats.mean_us, stats.p99_us))
        result.notes.append(f"poll_delay_us={delay_us}: "
                            f"{stats.count} samples")
    return result


# -- thread contention -------------------------------------------------------------


def measure_contention_once(num_threads: int, per_stream: bool,
                            duration_s: float, seed: int,
                            pause_s: float = CONTENTION_POLL_PAUSE_S
                            ) -> list[float]:
    """Threads each register ten dummy tasks and spin progress on either
    their own stream or the shared default stream."""
    engine = Engine()
    clock = wall_clock
    streams = [engine.stream_create() if per_stream else engine.null_stream
               for _ in range(num_threads)]
    sinks: list[list[float]] = [[] for _ in range(num_threads)]
    barrier = threading.Barrier(num_threads)

    def body(thread_id: int) -> None:
        stream = streams[thread_id]
        sink = sinks[thread_id]
        rng = random.Random(seed + thread_id)
        counter = CountDown(10)
        barrier.wait()
        base = clock() + duration_s
        for _ in range(10):
            jitter = rng.random() * CONTENTION_JITTER_SPAN_S
            start_pausing_dummy_task(engine, stream, clock, base + jitter,
                                     sink, counter, pause_s)
        progress = engine.stream_progress
        while counter.value > 0:
            progress(stream)

    threads = [threading.Thread(target=body, args=(i,), daemon=True)
               for i in range(num_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    merged: list[float] = []
    for sink in sinks:
        merged.extend(sink)
    return merged


def bench_thread_contention(config: BenchConfig,
                            virtual: bool = False) -> ScenarioResult:
    """Shared-stream versus per-stream latency as progress threads grow.

    Runs on the wall clock regardless of *virtual*: interleaving real
    threads through one shared virtual clock would measure the clock, not
    the contention.
    """
    result = ScenarioResult(["num_threads", "variant", "mean_latency_us",
                             "p99_latency_us"])
    sweep = [n for n in THREAD_SWEEP if n <= config.num_threads]
    for variant, per_stream in (("shared_stream", False),
                                ("per_stream", True)):
        for n in sweep:
            stats = LatencyStats()
            for rep in range(config.repetitions + 1):
                samples = measure_contention_once(
                    n, per_stream, config.task_duration_s,
                    config.seed + rep)
                if rep > 0:
                    stats.extend(samples)
            result.rows.append((n, variant, stats.mean_us, stats.p99_us))
            result.notes.append(f"{variant} num_threads={n}: "
                                f"{stats.count} samples")
    return result


# -- application-managed task queue ----------------------------------------------


def measure_task_class_once(clock: Clock, num_tasks: int,
                            duration_s: float,
                            gap_s: float = 2e-6) -> tuple[list[float],
                                                          list[int]]:
    """All tasks live in an application queue ordered by deadline; a single
    hook retires expired heads, so the per-pass cost stays flat."""
    engine = Engine()
    stream = engine.stream_create()
    sink: list[float] = []
    order: list[int] = []
    base = clock() + duration_s
    queue = [(base + i * gap_s, i) for i in range(num_tasks)]
    position = CountDown(0)

    def class_poll(task):
        now = clock()
        idx = position.value
        while idx < num_tasks and now >= queue[idx][0]:
            deadline, label = queue[idx]
            sink.append(now - deadline)
            order.append(label)
            idx += 1
        position.value = idx
        return DONE if idx >= num_tasks else PENDING

    engine.async_start(class_poll, None, stream)
    progress = engine.stream_progress
    while position.value < num_tasks:
        progress(stream)
    return sink, order


def bench_task_class(config: BenchConfig,
                     virtual: bool = False) -> ScenarioResult:
    """Latency versus pending count when only the queue head is checked."""
    result = ScenarioResult(["num_pending", "mean_latency_us",
                             "p99_latency_us"])
    for n in _sweep_powers(config.num_tasks):
        stats = LatencyStats()
        for rep in range(config.repetitions + 1):
            samples, _ = measure_task_class_once(_make_clock(virtual), n,
                                                 config.task_duration_s)
            if rep > 0:
                stats.extend(samples)
        result.rows.append((n, stats.mean_us, stats.p99_us))
        result.notes.append(f"num_pending={n}: {stats.count} samples")
    return result


# -- request completion events -----------------------------------------------------


def _noop_query(state):
    return None


def _noop_free(state):
    return None


def _noop_cancel(state, complete):
    return None


def measure_request_events_once(clock: Clock, num_requests: int,
                                duration_s: float,
                                gap_s: float = 2e-6
                                ) -> tuple[list[float], int]:
    """A driver task completes generalized requests at staggered deadlines;
    a scanner task polls the whole array with the side-effect-free query and
    fires a callback (recording latency) exactly once per completion."""
    engine = Engine()
    stream = engine.stream_create()
    base = clock() + duration_s
    deadlines = [base + i * gap_s for i in range(num_requests)]
    requests = [rq.grequest_start(_noop_query, _noop_free, _noop_cancel)
                for _ in range(num_requests)]
    array: list[Optional[rq.Request]] = list(requests)
    sink: list[float] = []
    fired = CountDown(0)
    cursor = CountDown(0)

    def driver_poll(task):
        now = clock()
        idx = cursor.value
        while idx < num_requests and now >= deadlines[idx]:
            rq.grequest_complete(requests[idx])
            idx += 1
        cursor.value = idx
        return DONE if idx >= num_requests else PENDING

    def scanner_poll(task):
        pending = 0
        for i in range(num_requests):
            req = array[i]
            if req is None:
                continue
            if rq.is_complete(req):
                sink.append(clock() - deadlines[i])
                fired.value += 1
                rq.free(req)
                array[i] = None
            else:
                pending += 1
        return DONE if pending == 0 else PENDING

    engine.async_start(driver_poll, None, stream)
    engine.async_start(scanner_poll, None, stream)
    progress = engine.stream_progress
    while fired.value < num_requests:
        progress(stream)
    return sink, fired.value


def bench_request_events(config: BenchConfig,
                         virtual: bool = False) -> ScenarioResult:
    """Overhead of generating completion events by scanning request arrays."""
    result = ScenarioResult(["num_requests", "mean_overhead_us",
                             "p99_overhead_us"])
    for n in _sweep_powers(config.num_requests):
        stats = LatencyStats()
        fired_total = 0
        for rep in range(config.repetitions + 1):
            samples, fired = measure_request_events_once(
                _make_clock(virtual), n, config.task_duration_s)
            if fired != n:
                raise BenchError(f"expected {n} callbacks, saw {fired}")
            if rep > 0:
                stats.extend(samples)
                fired_total += fired
        result.rows.append((n, stats.mean_us, stats.p99_us))
        result.notes.append(f"num_requests={n}: {stats.count} samples, "
                            f"{fired_total} callbacks")
    return result


# -- allreduce -------------------------------------------------------------------


def _allreduce_oracle(inputs: list[np.ndarray]) -> np.ndarray:
    """Sequential elementwise integer sum, independent of the transport."""
    total = np.zeros_like(inputs[0])
    for vec in inputs:
        total = total + vec
    return total


def measure_allreduce_once(world_size: int, count: int, seed: int,
                           use_baseline: bool) -> list[float]:
    """One timed collective across *world_size* rank threads, preceded by a
    correctness gate against the sequential oracle."""
    engine = Engine()
    world = World(engine, world_size)
    rng = np.random.default_rng(seed)
    inputs = [rng.integers(-2**20, 2**20, size=count).astype(np.int32)
              for _ in range(world_size)]
    expected = _allreduce_oracle(inputs)
    buffers = [vec.copy() for vec in inputs]
    samples = [0.0] * world_size
    barrier = threading.Barrier(world_size)
    call = baseline_allreduce if use_baseline else allreduce_blocking

    def body(rank: int) -> None:
        endpoint = world.endpoint(rank)
        barrier.wait()
        t0 = wall_clock()
        call(endpoint, buffers[rank], count=count)
        samples[rank] = wall_clock() - t0

    threads = [threading.Thread(target=body, args=(r,), daemon=True)
               for r in range(world_size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for rank in range(world_size):
        if not np.array_equal(buffers[rank], expected):
            raise BenchError(f"rank {rank} result disagrees with the "
                             "sequential oracle")
    return samples


def bench_allreduce(config: BenchConfig,
                    virtual: bool = False) -> ScenarioResult:
    """Latency of the two allreduce implementations across world sizes."""
    result = ScenarioResult(["world_size", "impl", "mean_latency_us",
                             "p99_latency_us"])
    sizes = [n for n in (2, 4, 8, 16) if n <= config.world_size]
    for impl, use_baseline in (("recursive_doubling", False),
                               ("baseline", True)):
        for size in sizes:
            stats = LatencyStats()
            for rep in range(config.repetitions + 1):
                samples = measure_allreduce_once(size, config.count,
                                                 config.seed + rep,
                                                 use_baseline)
                if rep > 0:
                    stats.extend(samples)
            result.rows.append((size, impl, stats.mean_us, stats.p99_us))
            result.notes.append(f"{impl} world_size={size}: "
                                f"{stats.count} samples")
    return result


# -- registry --------------------------------------------------------------------

SCENARIOS: dict[str, Callable[[BenchConfig, bool], ScenarioResult]] = {
    "pending-tasks": bench_pending_tasks,
    "poll-overhead": bench_poll_overhead,
    "thread-contention": bench_thread_contention,
    "task-class": bench_task_class,
    "request-events": bench_request_events,
    "allreduce": bench_allreduce,
}


def run_scenario(name: str, config: BenchConfig,
                 virtual: bool = False) -> ScenarioResult:
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; valid scenarios: "
                          + ", ".join(sorted(SCENARIOS)))
    config.validate()
    return SCENARIOS[name](config, virtual)
