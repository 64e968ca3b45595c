"""User-level allreduce algorithms driven by engine poll hooks.

Two implementations with the same contract (in-place elementwise sum of
32-bit integers across all ranks, power-of-two world sizes):

* recursive doubling: log2(P) rounds; in round r, rank x exchanges with
  rank ``x ^ (1 << r)`` and accumulates the partner's contribution.
* a naive baseline: linear gather to rank 0, local sum, then a linear
  broadcast, used as the performance comparison target.

Each rank's progress is a single poll-hook task checking its outstanding
requests with the side-effect-free completion query, so any thread driving
the owning stream advances every rank.  Integer overflow wraps (two's
complement); callers who care should keep sums inside 32 bits.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import request as rq
from .engine import DONE, PENDING, AsyncTask, PollOutcome, Stream, get_state
from .transport import Endpoint

ALLREDUCE_TAG = 0x7C01
GATHER_TAG = 0x7C02
BCAST_TAG = 0x7C03


class CollectiveError(ValueError):
    """Unsupported topology or buffer for a collective call."""


class CollectiveHandle:
    """Externally visible completion flag for an in-flight collective."""

    __slots__ = ("done",)

    def __init__(self) -> None:
        self.done = False


def _check_start(endpoint: Endpoint, buf: np.ndarray,
                 count: Optional[int]) -> int:
    size = endpoint.world.size
    if size & (size - 1):
        raise CollectiveError(f"world size {size} is not a power of two")
    if not isinstance(buf, np.ndarray) or buf.dtype != np.int32:
        raise CollectiveError("buffer must be an int32 numpy array")
    if not buf.flags.c_contiguous or not buf.flags.writeable:
        raise CollectiveError("buffer must be contiguous and writable")
    n = len(buf) if count is None else count
    if n < 1 or n > len(buf):
        raise CollectiveError(f"count {n} outside buffer of {len(buf)}")
    return n


class _RecursiveDoubling:
    __slots__ = ("endpoint", "buf", "tmp_buf", "count", "rank", "size",
                 "mask", "reqs", "tag", "context", "stream", "handle")

    def __init__(self, endpoint: Endpoint, buf: np.ndarray, count: int,
                 context: Optional[int], stream: Optional[Stream]) -> None:
        self.endpoint = endpoint
        self.buf = buf[:count]
        self.tmp_buf = np.empty(count, dtype=np.int32)
        self.count = count
        self.rank = endpoint.rank
        self.size = endpoint.world.size
        self.mask = 1
        self.reqs: list[Optional[rq.Request]] = [None, None]
        self.tag = ALLREDUCE_TAG
        self.context = context
        self.stream = stream
        self.handle = CollectiveHandle()


def _rd_poll(task: AsyncTask) -> PollOutcome:
    st = get_state(task)

    reqs = st.reqs
    settled = 0
    for i in (0, 1):
        r = reqs[i]
        if r is None:
            settled += 1
        elif rq.is_complete(r):
            rq.free(r)
            reqs[i] = None
            settled += 1
    if settled != 2:
        return PENDING

    if st.mask > 1:
        np.add(st.buf, st.tmp_buf, out=st.buf)

    if st.mask == st.size:
        st.handle.done = True
        return DONE

    partner = st.rank ^ st.mask
    reqs[0] = st.endpoint.irecv(st.tmp_buf, partner, st.tag,
                                context=st.context, stream=st.stream)
    reqs[1] = st.endpoint.isend(st.buf, partner, st.tag,
                                context=st.context, stream=st.stream)
    st.mask <<= 1
    return PENDING


def allreduce_start(endpoint: Endpoint, buf: np.ndarray, *,
                    count: Optional[int] = None,
                    context: Optional[int] = None,
                    stream: Optional[Stream] = None) -> CollectiveHandle:
    """Start an in-place recursive-doubling allreduce on this rank.

    The returned handle's ``done`` flag flips when the reduction lands in
    *buf*.  One collective per (endpoint, context) at a time.
    """
    n = _check_start(endpoint, buf, count)
    engine = endpoint.world.engine
    st = _RecursiveDoubling(endpoint, buf, n, context, stream)
    engine.async_start(_rd_poll, st, stream)
    return st.handle


def allreduce_blocking(endpoint: Endpoint, buf: np.ndarray, *,
                       count: Optional[int] = None,
                       context: Optional[int] = None,
                       stream: Optional[Stream] = None) -> None:
    """Recursive-doubling allreduce; spins progress until done."""
    handle = allreduce_start(endpoint, buf, count=count, context=context,
                             stream=stream)
    engine = endpoint.world.engine
    target = stream if stream is not None else engine.null_stream
    while not handle.done:
        engine.stream_progress(target)


class _GatherBcast:
    """Linear gather-sum-broadcast; one outstanding request at a time."""

    __slots__ = ("endpoint", "buf", "tmp_buf", "count", "rank", "size",
                 "context", "stream", "handle", "phase", "peer", "req")

    def __init__(self, endpoint: Endpoint, buf: np.ndarray, count: int,
                 context: Optional[int], stream: Optional[Stream]) -> None:
        self.endpoint = endpoint
        self.buf = buf[:count]
        self.tmp_buf = np.empty(count, dtype=np.int32)
        self.count = count
        self.rank = endpoint.rank
        self.size = endpoint.world.size
        self.context = context
        self.stream = stream
        self.handle = CollectiveHandle()
        self.phase = "gather"
        self.peer = 1
        self.req: Optional[rq.Request] = None


def _baseline_poll(task: AsyncTask) -> PollOutcome:
    st = get_state(task)
    ep = st.endpoint

    if st.req is not None:
        if not rq.is_complete(st.req):
            return PENDING
        rq.free(st.req)
        st.req = None
        if st.phase == "gather" and st.rank == 0:
            np.add(st.buf, st.tmp_buf, out=st.buf)
            st.peer += 1
        elif st.phase == "bcast" and st.rank == 0:
            st.peer += 1

    if st.size == 1:
        st.handle.done = True
        return DONE

    if st.rank == 0:
        if st.phase == "gather":
            if st.peer < st.size:
                st.req = ep.irecv(st.tmp_buf, st.peer, GATHER_TAG,
                                  context=st.context, stream=st.stream)
                return PENDING
            st.phase = "bcast"
            st.peer = 1
        if st.peer < st.size:
            st.req = ep.isend(st.buf, st.peer, BCAST_TAG,
                              context=st.context, stream=st.stream)
            return PENDING
        st.handle.done = True
        return DONE

    if st.phase == "gather":
        st.req = ep.isend(st.buf, 0, GATHER_TAG, context=st.context,
                          stream=st.stream)
        st.phase = "bcast_wait"
        return PENDING
    if st.phase == "bcast_wait":
        st.req = ep.irecv(st.buf, 0, BCAST_TAG, context=st.context,
                          stream=st.stream)
        st.phase = "finish"
        return PENDING
    st.handle.done = True
    return DONE


def baseline_allreduce_start(endpoint: Endpoint, buf: np.ndarray, *,
                             count: Optional[int] = None,
                             context: Optional[int] = None,
                             stream: Optional[Stream] = None
                             ) -> CollectiveHandle:
    """Start the gather-to-0 / sum / broadcast baseline on this rank."""
    n = _check_start(endpoint, buf, count)
    engine = endpoint.world.engine
    st = _GatherBcast(endpoint, buf, n, context, stream)
    engine.async_start(_baseline_poll, st, stream)
    return st.handle


def baseline_allreduce(endpoint: Endpoint, buf: np.ndarray, *,
                       count: Optional[int] = None,
                       context: Optional[int] = None,
                       stream: Optional[Stream] = None) -> None:
    """Baseline allreduce; spins progress until done."""
    handle = baseline_allreduce_start(endpoint, buf, count=count,
                                      context=context, stream=stream)
    engine = endpoint.world.engine
    target = stream if stream is not None else engine.null_stream
    while not handle.done:
        engine.stream_progress(target)
