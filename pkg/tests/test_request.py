"""Request tests: queries, wait, generalized requests, free semantics."""

from __future__ import annotations

import time

import pytest

from pace import (DONE, PENDING, Engine, InvalidRequestError,
                  ProgressRecursionError, RequestError, Status, VirtualClock,
                  World, get_state)
from pace import request as rq

from conftest import drive_until


def noop_query(state):
    return None


def noop_free(state):
    return None


def noop_cancel(state, complete):
    return None


def start_grequest(user_state=None):
    return rq.grequest_start(noop_query, noop_free, noop_cancel, user_state)


# -- is_complete -----------------------------------------------------------------


def test_fresh_grequest_not_complete():
    req = start_grequest()
    for _ in range(10_000):
        assert rq.is_complete(req) is False


def test_completed_grequest_is_complete():
    req = start_grequest()
    rq.grequest_complete(req)
    assert rq.is_complete(req) is True


def test_query_purity_on_pending_rendezvous_send(engine):
    """Completion queries advance nothing: all counters stay put."""
    world = World(engine, 2, clock=VirtualClock())
    req = engine and world.endpoint(0).isend(bytes(200_000), 1, tag=2)
    for _ in range(4):
        engine.stream_progress(engine.null_stream)
    # the send is parked waiting for a matching receive's clear-to-send
    before = (engine.snapshot_counters(), world.snapshot_counters())
    for _ in range(10_000):
        rq.is_complete(req)
    after = (engine.snapshot_counters(), world.snapshot_counters())
    assert rq.is_complete(req) is False
    assert before == after


def test_monotonic_once_complete():
    req = start_grequest()
    rq.grequest_complete(req)
    assert all(rq.is_complete(req) for _ in range(100))


def test_is_complete_on_freed_handle_errors():
    req = start_grequest()
    rq.grequest_complete(req)
    rq.free(req)
    with pytest.raises(InvalidRequestError):
        rq.is_complete(req)


# -- wait ------------------------------------------------------------------------


def test_wait_on_complete_request_runs_zero_passes(engine):
    req = start_grequest()
    rq.grequest_complete(req)
    passes_before = engine.null_stream.passes
    rq.wait(req, engine.null_stream)
    assert engine.null_stream.passes == passes_before


def test_wait_returns_after_deadline_task_completes(engine):
    """A dummy task completes the request when its wall deadline passes."""
    fired = []

    def query(state):
        fired.append("query")
        return Status(None, None, 0)

    req = rq.grequest_start(query, noop_free, noop_cancel)
    deadline = time.perf_counter() + 0.001

    def poll(task):
        if time.perf_counter() > deadline:
            rq.grequest_complete(get_state(task))
            return DONE
        return PENDING

    engine.async_start(poll, req)
    t0 = time.perf_counter()
    rq.wait(req, engine.null_stream)
    elapsed = time.perf_counter() - t0
    assert elapsed >= 0.001 - 1e-4
    assert fired == ["query"]  # query callback exactly once


def test_wait_recv_status_carries_envelope_fields(engine):
    world = World(engine, 2, clock=VirtualClock())
    buf = bytearray(64)
    recv = world.endpoint(1).irecv(buf, source=0, tag=42)
    world.endpoint(0).isend(b"x" * 64, 1, tag=42)
    status = rq.wait(recv, engine.null_stream)
    assert status == Status(source=0, tag=42, length=64)


def test_wait_propagates_recursion_error(engine):
    req = start_grequest()
    seen = []

    def poll(task):
        try:
            rq.wait(req, engine.null_stream)
        except ProgressRecursionError:
            seen.append(True)
        rq.grequest_complete(req)
        return DONE

    engine.async_start(poll, None)
    engine.stream_progress(engine.null_stream)
    assert seen == [True]


# -- generalized requests -----------------------------------------------------------


def test_grequest_requires_all_callbacks():
    with pytest.raises(ValueError):
        rq.grequest_start(noop_query, None, noop_cancel)


def test_grequest_double_complete_errors():
    req = start_grequest()
    rq.grequest_complete(req)
    with pytest.raises(RequestError, match="already complete"):
        rq.grequest_complete(req)


def test_grequest_complete_on_p2p_request_errors(engine):
    world = World(engine, 2, clock=VirtualClock())
    send = world.endpoint(0).isend(b"ab", 1, tag=0)
    with pytest.raises(RequestError, match="not a generalized"):
        rq.grequest_complete(send)


def test_grequest_complete_from_poll_hook_visible_to_waiter(engine):
    req = start_grequest()

    def poll(task):
        rq.grequest_complete(req)
        return DONE

    engine.async_start(poll, None)
    assert rq.is_complete(req) is False
    engine.stream_progress(engine.null_stream)
    assert rq.is_complete(req) is True


def test_query_callback_fills_status():
    req = rq.grequest_start(lambda s: Status(3, 9, 17), noop_free,
                            noop_cancel)
    rq.grequest_complete(req)
    assert req.status == Status(3, 9, 17)


# -- free ------------------------------------------------------------------------


def test_free_completed_grequest_fires_free_cb_once():
    calls = []
    req = rq.grequest_start(noop_query, lambda s: calls.append(s),
                            noop_cancel, "ctx")
    rq.grequest_complete(req)
    rq.free(req)
    assert calls == ["ctx"]


def test_free_pending_grequest_defers_free_cb_until_completion():
    calls = []
    req = rq.grequest_start(noop_query, lambda s: calls.append("freed"),
                            noop_cancel)
    rq.free(req)
    assert calls == []
    rq.grequest_complete(req)
    assert calls == ["freed"]


def test_double_free_errors():
    req = start_grequest()
    rq.grequest_complete(req)
    rq.free(req)
    with pytest.raises(InvalidRequestError, match="double free"):
        rq.free(req)


def test_free_pending_send_defers_destruction(engine):
    """Freeing an in-flight send leaves the transfer running to completion."""
    world = World(engine, 2, clock=VirtualClock())
    buf = bytearray(64)
    recv = world.endpoint(1).irecv(buf, 0, tag=1)
    send = world.endpoint(0).isend(b"y" * 64, 1, tag=1)
    rq.free(send)
    with pytest.raises(InvalidRequestError):
        rq.is_complete(send)
    drive_until(engine, lambda: rq.is_complete(recv))
    assert bytes(buf) == b"y" * 64
    assert world.stats.sends_completed == 1


def test_wait_frees_the_request(engine):
    req = start_grequest()
    rq.grequest_complete(req)
    rq.wait(req, engine.null_stream)
    with pytest.raises(InvalidRequestError):
        rq.is_complete(req)
