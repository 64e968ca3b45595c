"""Engine tests: streams, poll-hook tasks, and the collated pass."""

from __future__ import annotations

import threading

import pytest
from hypothesis import given, settings, strategies as st

from pace import (DONE, PENDING, Engine, ProgressRecursionError,
                  StreamStateError, VirtualClock, World, get_state, spawn)
from pace.bench.tasks import CountDown, start_dummy_task

from conftest import drive_until


def make_counting_poll(calls, outcome=DONE):
    def poll(task):
        calls.append(get_state(task))
        return outcome
    return poll


# -- stream creation -------------------------------------------------------------


def test_stream_create_fresh_and_empty(engine):
    stream = engine.stream_create({"note": "x"})
    assert stream.pending_tasks == 0
    assert stream.hints == {"note": "x"}


def test_stream_create_distinct_ids(engine):
    a, b = engine.stream_create(), engine.stream_create()
    assert a.stream_id != b.stream_id


@pytest.mark.parametrize("key", ["skip_transport", "skip_subsystem:transport"])
def test_stream_hint_skips_transport_hook(key):
    engine = Engine()
    world = World(engine, 1, clock=VirtualClock())
    skipping = engine.stream_create({key: "true"})
    for _ in range(25):
        engine.stream_progress(skipping)
    assert world.hook.calls == 0
    engine.stream_progress(engine.null_stream)
    assert world.hook.calls == 1


def test_unrecognized_hints_ignored(engine):
    stream = engine.stream_create({"whatever": "true", "skip_x": "false"})
    assert engine.stream_progress(stream) is False


# -- stream free ------------------------------------------------------------------


def test_stream_free_fresh(engine):
    stream = engine.stream_create()
    engine.stream_free(stream)
    assert stream.freed
    with pytest.raises(StreamStateError):
        engine.stream_progress(stream)
    with pytest.raises(StreamStateError):
        engine.async_start(lambda t: DONE, None, stream)


def test_stream_free_with_pending_task_errors(engine):
    stream = engine.stream_create()
    engine.async_start(lambda t: PENDING, None, stream)
    with pytest.raises(StreamStateError, match="pending task"):
        engine.stream_free(stream)


def test_stream_free_null_stream_errors(engine):
    with pytest.raises(StreamStateError, match="default stream"):
        engine.stream_free(engine.null_stream)


def test_stream_double_free_errors(engine):
    stream = engine.stream_create()
    engine.stream_free(stream)
    with pytest.raises(StreamStateError):
        engine.stream_free(stream)


# -- async tasks --------------------------------------------------------------------


def test_expired_dummy_task_retires_in_one_poll(engine):
    clock = VirtualClock()
    stream = engine.stream_create()
    sink, counter = [], CountDown(1)
    start_dummy_task(engine, stream, clock, deadline=0.0, sink=sink,
                     counter=counter)
    assert engine.stream_progress(stream) is True
    assert counter.value == 0 and stream.pending_tasks == 0
    assert len(sink) == 1


def test_ten_dummy_tasks_all_retire(engine):
    clock = VirtualClock()
    stream = engine.stream_create()
    sink, counter = [], CountDown(10)
    deadline = clock() + 0.001
    for _ in range(10):
        start_dummy_task(engine, stream, clock, deadline, sink, counter)
    drive_until(engine, lambda: counter.value == 0, stream)
    assert stream.pending_tasks == 0
    assert len(sink) == 10
    assert all(lat >= 0.0 for lat in sink)


def test_task_isolated_to_its_stream(engine):
    stream_a = engine.stream_create()
    stream_b = engine.stream_create()
    calls_a, calls_b = [], []
    engine.async_start(make_counting_poll(calls_a, PENDING), "a", stream_a)
    engine.async_start(make_counting_poll(calls_b, PENDING), "b", stream_b)
    for _ in range(7):
        engine.stream_progress(stream_b)
    assert calls_a == []
    assert calls_b == ["b"] * 7


def test_null_stream_does_not_aggregate_other_streams(engine):
    stream = engine.stream_create()
    calls = []
    engine.async_start(make_counting_poll(calls, PENDING), "s", stream)
    for _ in range(5):
        engine.stream_progress(engine.null_stream)
    assert calls == []


def test_async_start_requires_hook(engine):
    with pytest.raises(ValueError):
        engine.async_start(None, "state")


# -- get_state -------------------------------------------------------------------


def test_get_state_identity(engine):
    marker = object()
    seen = []
    engine.async_start(make_counting_poll(seen), marker)
    engine.stream_progress(engine.null_stream)
    assert seen[0] is marker


def test_get_state_isolation_between_tasks(engine):
    seen = []
    engine.async_start(make_counting_poll(seen), "s1")
    engine.async_start(make_counting_poll(seen), "s2")
    engine.stream_progress(engine.null_stream)
    assert seen == ["s1", "s2"]


def test_state_mutation_visible_across_passes(engine):
    state = {"count": 0}

    def poll(task):
        ctx = get_state(task)
        ctx["count"] += 1
        return DONE if ctx["count"] >= 3 else PENDING

    engine.async_start(poll, state)
    passes = drive_until(engine, lambda: state["count"] >= 3)
    assert passes == 3


# -- spawn ------------------------------------------------------------------------


def test_spawned_child_polled_next_pass(engine):
    events = []

    def child(task):
        events.append("child")
        return DONE

    def parent(task):
        events.append("parent")
        spawn(task, child, None, engine.null_stream)
        return DONE

    engine.async_start(parent, None)
    engine.stream_progress(engine.null_stream)
    assert events == ["parent"]  # child registered, not yet polled
    assert engine.null_stream.pending_tasks == 1
    engine.stream_progress(engine.null_stream)
    assert events == ["parent", "child"]


def test_spawn_chain_one_retirement_per_pass(engine):
    stream = engine.stream_create()
    retired = []

    def make(depth):
        def poll(task):
            retired.append(depth)
            if depth < 5:
                spawn(task, make(depth + 1), None, stream)
            return DONE
        return poll

    engine.async_start(make(1), None, stream)
    passes = drive_until(engine, lambda: stream.pending_tasks == 0, stream)
    assert retired == [1, 2, 3, 4, 5]
    assert passes >= 5


def test_spawn_same_stream_appends_at_tail(engine):
    stream = engine.stream_create()
    order = []

    def tail_task(task):
        order.append("tail")
        return DONE

    def spawner(task):
        spawn(task, tail_task, None, stream)
        return DONE

    def sibling(task):
        order.append("sibling")
        return PENDING

    engine.async_start(spawner, None, stream)
    engine.async_start(sibling, None, stream)
    engine.stream_progress(stream)
    engine.stream_progress(stream)
    # FIFO: the pre-existing sibling is polled before the spawned tail task.
    assert order == ["sibling", "sibling", "tail"]


def test_spawn_cross_stream(engine):
    stream_a, stream_b = engine.stream_create(), engine.stream_create()
    events = []

    def child(task):
        events.append("child-on-b")
        return DONE

    def parent(task):
        spawn(task, child, None, stream_b)
        return DONE

    engine.async_start(parent, None, stream_a)
    engine.stream_progress(stream_a)
    assert stream_b.pending_tasks == 1
    engine.stream_progress(stream_b)
    assert events == ["child-on-b"]


def test_spawn_to_freed_stream_errors(engine):
    dead = engine.stream_create()
    engine.stream_free(dead)

    def parent(task):
        with pytest.raises(StreamStateError):
            spawn(task, lambda t: DONE, None, dead)
        return DONE

    engine.async_start(parent, None)
    engine.stream_progress(engine.null_stream)


# -- stream_progress ------------------------------------------------------------------


def test_progress_empty_stream_returns_false(engine):
    World(engine, 1, clock=VirtualClock())  # idle transport hook installed
    stream = engine.stream_create()
    assert engine.stream_progress(stream) is False


def test_progress_retirement_returns_true_and_shrinks(engine):
    stream = engine.stream_create()
    engine.async_start(lambda t: DONE, None, stream)
    assert stream.pending_tasks == 1
    assert engine.stream_progress(stream) is True
    assert stream.pending_tasks == 0


def test_pending_only_pass_reports_no_progress(engine):
    stream = engine.stream_create()
    engine.async_start(lambda t: PENDING, None, stream)
    assert engine.stream_progress(stream) is False


def test_hook_progress_skips_later_hooks_but_polls_tasks(engine):
    trace = engine.enable_trace()
    engine.register_subsystem_hook("first", lambda: True, order=1)
    engine.register_subsystem_hook("second", lambda: False, order=2)
    polled = []
    engine.async_start(make_counting_poll(polled, PENDING), "t")
    engine.stream_progress(engine.null_stream)
    hook_names = [e[3] for e in trace.hook_events()]
    assert hook_names == ["first"]  # early exit before "second"
    assert polled == ["t"]  # tasks still polled in the same pass


def test_hooks_invoked_in_ascending_order(engine):
    trace = engine.enable_trace()
    engine.register_subsystem_hook("late", lambda: False, order=100)
    engine.register_subsystem_hook("early", lambda: False, order=10)
    engine.stream_progress(engine.null_stream)
    assert [e[3] for e in trace.hook_events()] == ["early", "late"]


def test_duplicate_hook_order_rejected(engine):
    engine.register_subsystem_hook("a", lambda: False, order=5)
    with pytest.raises(ValueError, match="duplicate"):
        engine.register_subsystem_hook("b", lambda: False, order=5)


def test_progress_without_hooks_polls_tasks(engine):
    polled = []
    engine.async_start(make_counting_poll(polled), "x")
    engine.stream_progress(engine.null_stream)
    assert polled == ["x"]


# -- recursion guard ---------------------------------------------------------------


def test_recursion_guard_is_deterministic(engine):
    caught = []

    def recursive_poll(task):
        try:
            engine.stream_progress(engine.null_stream)
        except ProgressRecursionError:
            caught.append(True)
        return DONE

    for _ in range(20):
        engine.async_start(recursive_poll, None)
    engine.stream_progress(engine.null_stream)
    assert caught == [True] * 20


def test_recursion_guard_covers_other_streams_of_same_engine(engine):
    other = engine.stream_create()
    caught = []

    def poll(task):
        try:
            engine.stream_progress(other)
        except ProgressRecursionError:
            caught.append(True)
        return DONE

    engine.async_start(poll, None)
    engine.stream_progress(engine.null_stream)
    assert caught == [True]


# -- trace-based order properties ------------------------------------------------------


def run_traced_retirement(durations):
    """Oracle-checked run: returns (trace, registration order) for dummy
    tasks with the given virtual-second durations."""
    engine = Engine()
    trace = engine.enable_trace()
    stream = engine.stream_create()
    clock = VirtualClock()
    counter = CountDown(len(durations))
    sink = []
    base = clock.peek()
    for duration in durations:
        start_dummy_task(engine, stream, clock, base + duration, sink,
                         counter)
    drive_until(engine, lambda: counter.value == 0, stream)
    return trace, stream


@given(st.lists(st.floats(min_value=0.0, max_value=1e-4,
                          allow_nan=False), min_size=1, max_size=60))
@settings(max_examples=40, deadline=None)
def test_fifo_polling_and_single_invocation(durations):
    trace, _ = run_traced_retirement(durations)
    events = trace.task_events()
    ids_in_registration_order = sorted({e[3] for e in events})

    alive = list(ids_in_registration_order)
    by_pass: dict[int, list] = {}
    for pass_no, _, _, ident, outcome in events:
        by_pass.setdefault(pass_no, []).append((ident, outcome))
    for pass_no in sorted(by_pass):
        polled = [ident for ident, _ in by_pass[pass_no]]
        # exactly the alive tasks, in registration (FIFO) order, once each
        assert polled == alive
        assert len(set(polled)) == len(polled)
        finished = {ident for ident, outcome in by_pass[pass_no]
                    if outcome == "done"}
        alive = [i for i in alive if i not in finished]
    assert alive == []  # liveness: every task retired


@given(st.integers(min_value=1, max_value=200))
@settings(max_examples=20, deadline=None)
def test_liveness_registry_empties(n):
    engine = Engine()
    stream = engine.stream_create()
    remaining = CountDown(n)

    def poll(task):
        state = get_state(task)
        state[0] -= 1
        if state[0] <= 0:
            remaining.value -= 1
            return DONE
        return PENDING

    for i in range(n):
        engine.async_start(poll, [i % 7 + 1], stream)
    drive_until(engine, lambda: remaining.value == 0, stream)
    assert stream.pending_tasks == 0


# -- concurrency -----------------------------------------------------------------------


def test_concurrent_distinct_streams_stress(engine):
    """8 threads x 1000 tasks on private streams: no deadlock, no leaks."""
    leftovers = []

    def worker():
        stream = engine.stream_create()
        counter = CountDown(1000)

        def poll(task):
            counter.value -= 1
            return DONE

        for _ in range(1000):
            engine.async_start(poll, None, stream)
        while counter.value > 0:
            engine.stream_progress(stream)
        leftovers.append(stream.pending_tasks)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=60)
    assert all(not t.is_alive() for t in threads)
    assert leftovers == [0] * 8


def test_concurrent_same_stream_serializes_safely(engine):
    stream = engine.stream_create()
    counter = CountDown(4000)

    def poll(task):
        counter.value -= 1
        return DONE

    for _ in range(4000):
        engine.async_start(poll, None, stream)

    def spin():
        while counter.value > 0:
            engine.stream_progress(stream)

    threads = [threading.Thread(target=spin) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=60)
    assert counter.value == 0
    assert stream.pending_tasks == 0
