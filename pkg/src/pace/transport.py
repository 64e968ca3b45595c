"""In-process multi-endpoint message transport with a simulated NIC.

Ranks are endpoints inside one process.  A send is classified by payload
size into one of three protocols (plus an optional pipelined fourth):

* lightweight: the payload is copied at initiation and the request is
  already complete when ``isend`` returns; zero wait states.
* eager: the payload travels without a handshake; the sender traverses one
  wait state until the NIC reports completion.
* rendezvous: a ready-to-send/clear-to-send handshake precedes the payload;
  the sender traverses two wait states, and the payload is never shipped
  before a matching receive exists.
* pipeline (optional, above a configurable threshold): rendezvous handshake
  followed by fixed-size chunks with a small in-flight cap.

All protocol state machines advance only under the transport subsystem hook,
which a :class:`World` registers with its engine; each machine moves at most
one state per pass.  NIC completion here means the payload is visible in the
peer's incoming queue, which is the stronger of the two readings of "local
send completion".
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .clock import Clock, wall_clock
from .engine import Engine, Stream, TRANSPORT_HOOK_ORDER
from .request import (Request, RequestKind, Status, _complete_from_transport)

DEFAULT_LIGHTWEIGHT_BYTES = 1024
DEFAULT_EAGER_BYTES = 65536
PIPELINE_CHUNK_BYTES = 65536
PIPELINE_MAX_IN_FLIGHT = 2


class TransportError(RuntimeError):
    """Invalid transport usage (bad rank, context, or thresholds)."""


class Protocol(Enum):
    """Wire-level packet kinds; also the envelope's protocol tag."""

    EAGER = "EAGER"
    RTS = "RTS"
    CTS = "CTS"
    RDV_DATA = "RDV_DATA"


class SendMode(Enum):
    LIGHTWEIGHT = "lightweight"
    EAGER = "eager"
    RENDEZVOUS = "rendezvous"
    PIPELINE = "pipeline"


class SendState(Enum):
    LIGHTWEIGHT_DONE = "LIGHTWEIGHT_DONE"
    EAGER_WAIT_NIC = "EAGER_WAIT_NIC"
    RDV_WAIT_CTS = "RDV_WAIT_CTS"
    RDV_WAIT_DATA = "RDV_WAIT_DATA"
    COMPLETE = "COMPLETE"


class RecvState(Enum):
    WAIT_EAGER = "WAIT_EAGER"
    RDV_SEND_CTS = "RDV_SEND_CTS"
    RDV_WAIT_DATA = "RDV_WAIT_DATA"
    COMPLETE = "COMPLETE"


SEND_WAIT_STATES = frozenset(
    {SendState.EAGER_WAIT_NIC, SendState.RDV_WAIT_CTS,
     SendState.RDV_WAIT_DATA})
RECV_WAIT_STATES = frozenset(
    {RecvState.WAIT_EAGER, RecvState.RDV_WAIT_DATA})


def wait_states(history: tuple) -> int:
    """Count wait states in a state-machine history."""
    return sum(1 for s in history
               if s in SEND_WAIT_STATES or s in RECV_WAIT_STATES)


@dataclass(frozen=True, slots=True)
class Envelope:
    """Matching and dispatch key; matching uses (source, tag, context)."""

    source: int
    tag: int
    context: int
    length: int
    protocol: Protocol

    def key(self) -> tuple[int, int, int]:
        return (self.source, self.tag, self.context)


@dataclass(frozen=True, slots=True)
class LatencyModel:
    """Fixed per-packet plus per-byte NIC delay, in seconds."""

    per_packet_s: float = 0.0
    per_byte_s: float = 0.0

    def delay(self, nbytes: int) -> float:
        return self.per_packet_s + self.per_byte_s * nbytes


class _Packet:
    __slots__ = ("kind", "envelope", "dst", "payload", "sender_op",
                 "recv_op", "offset")

    def __init__(self, kind: Protocol, envelope: Envelope, dst: int,
                 payload: Optional[bytes] = None,
                 sender_op: Optional[int] = None,
                 recv_op: Optional[int] = None, offset: int = 0) -> None:
        self.kind = kind
        self.envelope = envelope
        self.dst = dst
        self.payload = payload
        self.sender_op = sender_op
        self.recv_op = recv_op
        self.offset = offset


class _NicItem:
    __slots__ = ("packet", "ready_time", "delivered", "source_view")

    def __init__(self, packet: _Packet, ready_time: float,
                 source_view: Optional[memoryview] = None) -> None:
        self.packet = packet
        self.ready_time = ready_time
        self.delivered = False
        # When set, the payload bytes are materialized from this view at
        # delivery time: the transport owns the buffer until completion.
        self.source_view = source_view


class SimulatedNic:
    """Per-endpoint transmit queue; items complete in FIFO order."""

    __slots__ = ("work_queue",)

    def __init__(self) -> None:
        self.work_queue: deque[_NicItem] = deque()

    def submit(self, item: _NicItem) -> None:
        self.work_queue.append(item)


class _Unexpected:
    __slots__ = ("envelope", "payload", "sender_op")

    def __init__(self, envelope: Envelope, payload: Optional[bytes],
                 sender_op: Optional[int]) -> None:
        self.envelope = envelope
        self.payload = payload
        self.sender_op = sender_op


class _SendOp:
    __slots__ = ("op_id", "src", "dst", "envelope", "mode", "state",
                 "history", "request", "view", "length", "items",
                 "cts_received", "peer_recv_op", "next_offset")

    def __init__(self, op_id: int, src: int, dst: int, envelope: Envelope,
                 mode: SendMode, request: Request,
                 view: Optional[memoryview], length: int) -> None:
        self.op_id = op_id
        self.src = src
        self.dst = dst
        self.envelope = envelope
        self.mode = mode
        self.state: Optional[SendState] = None
        self.history: list[SendState] = []
        self.request = request
        self.view = view
        self.length = length
        self.items: list[_NicItem] = []
        self.cts_received = False
        self.peer_recv_op: Optional[int] = None
        self.next_offset = 0

    def enter(self, state: SendState) -> None:
        self.state = state
        self.history.append(state)


class _RecvOp:
    __slots__ = ("op_id", "rank", "pattern", "view", "capacity", "state",
                 "history", "request", "eager_payload", "rdv_sender_op",
                 "expected", "bytes_received", "error", "matched_envelope")

    def __init__(self, op_id: int, rank: int, pattern: tuple[int, int, int],
                 view: memoryview, capacity: int, request: Request) -> None:
        self.op_id = op_id
        self.rank = rank
        self.pattern = pattern
        self.view = view
        self.capacity = capacity
        self.state: Optional[RecvState] = None
        self.history: list[RecvState] = []
        self.request = request
        self.eager_payload: Optional[bytes] = None
        self.rdv_sender_op: Optional[int] = None
        self.expected = -1
        self.bytes_received = 0
        self.error: Optional[str] = None
        self.matched_envelope: Optional[Envelope] = None

    def enter(self, state: RecvState) -> None:
        self.state = state
        self.history.append(state)


@dataclass
class TransportStats:
    """Always-on counters; errored receives count as completed."""

    sends_issued: int = 0
    sends_completed: int = 0
    recvs_posted: int = 0
    recvs_completed: int = 0
    deliveries: int = 0
    matches: int = 0
    transitions: int = 0
    staging_copies: int = 0
    unexpected_arrivals: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)


class Endpoint:
    """One simulated rank: incoming queue, matching lists, and a NIC."""

    __slots__ = ("rank", "world", "in_queue", "posted_recvs", "unexpected",
                 "nic", "_match_lock")

    def __init__(self, rank: int, world: "World") -> None:
        self.rank = rank
        self.world = world
        self.in_queue: deque[_Packet] = deque()
        self.posted_recvs: list[_RecvOp] = []
        self.unexpected: list[_Unexpected] = []
        self.nic = SimulatedNic()
        self._match_lock = threading.Lock()

    def isend(self, buffer, dest: int, tag: int, *,
              length: Optional[int] = None, context: Optional[int] = None,
              stream: Optional[Stream] = None) -> Request:
        """Start a nonblocking send; the protocol is picked by length."""
        return self.world._isend(self, buffer, dest, tag, length, context,
                                 stream)

    def irecv(self, buffer, source: int, tag: int, *,
              capacity: Optional[int] = None, context: Optional[int] = None,
              stream: Optional[Stream] = None) -> Request:
        """Post a nonblocking receive for an exact (source, tag, context)."""
        return self.world._irecv(self, buffer, source, tag, capacity,
                                 context, stream)

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Endpoint rank={self.rank}/{self.world.size}>"


def _byte_view(buffer) -> memoryview:
    view = memoryview(buffer)
    if not view.contiguous:
        raise TransportError("buffers must be contiguous")
    if view.format != "B" or view.itemsize != 1 or view.ndim != 1:
        view = view.cast("B")
    return view


class World:
    """A set of endpoints sharing a context registry and one progress hook.

    Creating a world registers its transport hook with the engine at
    ``TRANSPORT_HOOK_ORDER``; one world per engine.
    """

    def __init__(self, engine: Engine, world_size: int,
                 latency_model: Optional[LatencyModel] = None,
                 clock: Clock = wall_clock,
                 hook_order: int = TRANSPORT_HOOK_ORDER) -> None:
        if world_size < 1:
            raise TransportError("world_size must be at least 1")
        self.engine = engine
        self.size = world_size
        self.latency = latency_model or LatencyModel()
        self.clock = clock
        self.lightweight_bytes: float = DEFAULT_LIGHTWEIGHT_BYTES
        self.eager_bytes: float = DEFAULT_EAGER_BYTES
        self.pipeline_bytes: Optional[int] = None
        self.endpoints = [Endpoint(r, self) for r in range(world_size)]
        self.default_context = 0
        self._contexts = {0}
        self._next_context = 1
        self.stats = TransportStats()
        self.packet_trace: Optional[list[tuple]] = None
        self._drain_lock = threading.Lock()
        self._drain_passes = 0
        self._op_ids = 0
        self._active_sends: list[_SendOp] = []
        self._active_recvs: list[_RecvOp] = []
        self._staged_sends: deque[_SendOp] = deque()
        self._staged_recvs: deque[_RecvOp] = deque()
        self._sends_by_id: dict[int, _SendOp] = {}
        self._recvs_by_id: dict[int, _RecvOp] = {}
        self.hook = engine.register_subsystem_hook("transport",
                                                   self._hook_poll,
                                                   hook_order)

    # -- configuration -------------------------------------------------------

    def set_thresholds(self, lightweight_bytes: float, eager_bytes: float,
                       pipeline_bytes: Optional[int] = None) -> None:
        """Reclassify subsequent sends; inverted thresholds are an error.

        ``float("inf")`` is accepted as an unlimited sentinel.
        """
        if lightweight_bytes < 0 or eager_bytes < lightweight_bytes:
            raise TransportError("thresholds must satisfy "
                                 "0 <= lightweight <= eager")
        if pipeline_bytes is not None and pipeline_bytes < eager_bytes:
            raise TransportError("pipeline threshold must be >= eager")
        self.lightweight_bytes = lightweight_bytes
        self.eager_bytes = eager_bytes
        self.pipeline_bytes = pipeline_bytes

    def classify(self, nbytes: int) -> SendMode:
        if nbytes <= self.lightweight_bytes:
            return SendMode.LIGHTWEIGHT
        if nbytes <= self.eager_bytes:
            return SendMode.EAGER
        if self.pipeline_bytes is not None and nbytes > self.pipeline_bytes:
            return SendMode.PIPELINE
        return SendMode.RENDEZVOUS

    def create_context(self) -> int:
        ctx = self._next_context
        self._next_context += 1
        self._contexts.add(ctx)
        return ctx

    def endpoint(self, rank: int) -> Endpoint:
        return self.endpoints[rank]

    # -- instrumentation -------------------------------------------------------

    def enable_packet_trace(self) -> list[tuple]:
        self.packet_trace = []
        return self.packet_trace

    def _trace(self, src: int, dst: int, tag: int, protocol: Protocol,
               nbytes: int, event: str) -> None:
        trace = self.packet_trace
        if trace is not None:
            trace.append((self._drain_passes, src, dst, tag, protocol.value,
                          nbytes, event))

    def formatted_trace(self) -> list[str]:
        """Trace as ``pass,src,dst,tag,protocol,bytes,event`` lines."""
        if self.packet_trace is None:
            return []
        return [",".join(str(f) for f in rec) for rec in self.packet_trace]

    def snapshot_counters(self) -> dict[str, int]:
        counters = self.stats.as_dict()
        counters["drain_passes"] = self._drain_passes
        return counters

    def idle(self) -> bool:
        """True when no packets are queued and no operation is in flight."""
        if self._active_sends or self._active_recvs:
            return False
        if self._staged_sends or self._staged_recvs:
            return False
        for ep in self.endpoints:
            if ep.in_queue or ep.nic.work_queue:
                return False
        return True

    def drain_until_idle(self, stream: Optional[Stream] = None,
                         max_passes: int = 1_000_000) -> int:
        """Spin progress on *stream* until the transport is quiescent."""
        return self.engine.drive(stream, until=self.idle,
                                 max_passes=max_passes)

    # -- send / recv -----------------------------------------------------------

    def _check_common(self, rank: int, context: Optional[int]) -> int:
        if not 0 <= rank < self.size:
            raise TransportError(f"rank {rank} outside world of {self.size}")
        ctx = self.default_context if context is None else context
        if ctx not in self._contexts:
            raise TransportError(f"unknown context id {ctx}")
        return ctx

    def _isend(self, ep: Endpoint, buffer, dest: int, tag: int,
               length: Optional[int], context: Optional[int],
               stream: Optional[Stream]) -> Request:
        ctx = self._check_common(dest, context)
        view = _byte_view(buffer)
        nbytes = view.nbytes if length is None else length
        if nbytes > view.nbytes:
            raise TransportError("length exceeds the supplied buffer")
        mode = self.classify(nbytes)
        owner = (stream or self.engine.null_stream).stream_id
        request = Request(RequestKind.P2P_SEND, owner_stream=owner)
        self._op_ids += 1
        op_id = self._op_ids

        if mode is SendMode.LIGHTWEIGHT:
            envelope = Envelope(ep.rank, tag, ctx, nbytes, Protocol.EAGER)
            op = _SendOp(op_id, ep.rank, dest, envelope, mode, request,
                         None, nbytes)
            op.enter(SendState.LIGHTWEIGHT_DONE)
            # Buffered send: copy now so the caller's buffer is free to
            # reuse, and complete the request at initiation.
            payload = bytes(view[:nbytes])
            item = _NicItem(_Packet(Protocol.EAGER, envelope, dest,
                                    payload=payload, sender_op=op_id),
                            self.clock() + self.latency.delay(nbytes))
            op.items.append(item)
            ep.nic.submit(item)
            _complete_from_transport(request, Status(None, tag, nbytes))
        elif mode is SendMode.EAGER:
            envelope = Envelope(ep.rank, tag, ctx, nbytes, Protocol.EAGER)
            op = _SendOp(op_id, ep.rank, dest, envelope, mode, request,
                         view, nbytes)
            op.enter(SendState.EAGER_WAIT_NIC)
            item = _NicItem(_Packet(Protocol.EAGER, envelope, dest,
                                    sender_op=op_id),
                            self.clock() + self.latency.delay(nbytes),
                            source_view=view[:nbytes])
            op.items.append(item)
            ep.nic.submit(item)
        else:  # rendezvous or pipeline: handshake first
            envelope = Envelope(ep.rank, tag, ctx, nbytes, Protocol.RTS)
            op = _SendOp(op_id, ep.rank, dest, envelope, mode, request,
                         view, nbytes)
            op.enter(SendState.RDV_WAIT_CTS)
            ep.nic.submit(_NicItem(_Packet(Protocol.RTS, envelope, dest,
                                           sender_op=op_id),
                                   self.clock() + self.latency.delay(0)))

        request._op = op
        self._sends_by_id[op_id] = op
        self._staged_sends.append(op)
        self.stats.sends_issued += 1
        self._trace(ep.rank, dest, tag, envelope.protocol,
                    nbytes if envelope.protocol is Protocol.EAGER else 0,
                    "SEND")
        return request

    def _irecv(self, ep: Endpoint, buffer, source: int, tag: int,
               capacity: Optional[int], context: Optional[int],
               stream: Optional[Stream]) -> Request:
        ctx = self._check_common(source, context)
        view = _byte_view(buffer)
        cap = view.nbytes if capacity is None else capacity
        if cap > view.nbytes:
            raise TransportError("capacity exceeds the supplied buffer")
        owner = (stream or self.engine.null_stream).stream_id
        request = Request(RequestKind.P2P_RECV, owner_stream=owner)
        self._op_ids += 1
        op = _RecvOp(self._op_ids, ep.rank, (source, tag, ctx), view, cap,
                     request)
        op.enter(RecvState.WAIT_EAGER)
        request._op = op

        # Claim a matching unexpected envelope at post time; the state
        # machine still completes under the hook, on the next pass.
        with ep._match_lock:
            claimed = None
            for idx, entry in enumerate(ep.unexpected):
                if entry.envelope.key() == op.pattern:
                    claimed = ep.unexpected.pop(idx)
                    break
            if claimed is None:
                ep.posted_recvs.append(op)
        if claimed is not None:
            self._attach_match(op, claimed.envelope, claimed.payload,
                               claimed.sender_op)

        self._recvs_by_id[op.op_id] = op
        self._staged_recvs.append(op)
        self.stats.recvs_posted += 1
        return request

    def _attach_match(self, op: _RecvOp, envelope: Envelope,
                      payload: Optional[bytes],
                      sender_op: Optional[int]) -> None:
        op.matched_envelope = envelope
        op.expected = envelope.length
        if envelope.length > op.capacity:
            op.error = (f"truncation: message of {envelope.length} bytes "
                        f"exceeds receive capacity {op.capacity}")
            # Keep the transfer alive so the sender still completes; the
            # payload lands in transport-owned scratch space.
            op.view = memoryview(bytearray(envelope.length)).cast("B")
        if envelope.protocol is Protocol.RTS:
            op.rdv_sender_op = sender_op
        else:
            op.eager_payload = payload if payload is not None else b""
        self.stats.matches += 1
        self._trace(envelope.source, op.rank, envelope.tag,
                    envelope.protocol, envelope.length, "MATCH")

    # -- the collated-progress hook ---------------------------------------------

    def _hook_poll(self) -> bool:
        """Transport subsystem poll: cheap no-op when nothing is pending."""
        if not (self._active_sends or self._active_recvs
                or self._staged_sends or self._staged_recvs):
            return False
        if not self._drain_lock.acquire(blocking=False):
            # Another stream's pass is draining right now.
            return False
        try:
            return self._drain()
        finally:
            self._drain_lock.release()

    def _drain(self) -> bool:
        self._drain_passes += 1
        progressed = False
        now = self.clock()

        staged = self._staged_sends
        while staged:
            self._active_sends.append(staged.popleft())
        staged_r = self._staged_recvs
        while staged_r:
            self._active_recvs.append(staged_r.popleft())

        # (a) NIC transmissions whose delay elapsed become visible at the
        # peer, strictly FIFO per sending endpoint.
        for ep in self.endpoints:
            queue = ep.nic.work_queue
            while queue and queue[0].ready_time <= now:
                item = queue.popleft()
                packet = item.packet
                if item.source_view is not None:
                    packet.payload = bytes(item.source_view)
                    item.source_view = None
                item.delivered = True
                self.endpoints[packet.dst].in_queue.append(packet)
                self.stats.deliveries += 1
                env = packet.envelope
                self._trace(env.source, packet.dst, env.tag, packet.kind,
                            len(packet.payload) if packet.payload else 0,
                            "ARRIVE")
                progressed = True

        # (b) Dispatch arrived packets: matching for EAGER/RTS, direct
        # routing for CTS and payload chunks.
        for ep in self.endpoints:
            in_queue = ep.in_queue
            while in_queue:
                packet = in_queue.popleft()
                progressed = True
                kind = packet.kind
                if kind is Protocol.EAGER or kind is Protocol.RTS:
                    self._dispatch_match(ep, packet)
                elif kind is Protocol.CTS:
                    op = self._sends_by_id.get(packet.sender_op)
                    if op is not None:
                        op.cts_received = True
                        op.peer_recv_op = packet.recv_op
                else:  # payload chunk
                    rop = self._recvs_by_id.get(packet.recv_op)
                    if rop is not None:
                        data = packet.payload or b""
                        rop.view[packet.offset:packet.offset + len(data)] = \
                            data
                        rop.bytes_received += len(data)

        # (c) Advance every protocol state machine by at most one step.
        transitions_before = self.stats.transitions
        if self._active_sends:
            self._active_sends = [op for op in self._active_sends
                                  if not self._advance_send(op)]
        if self._active_recvs:
            self._active_recvs = [op for op in self._active_recvs
                                  if not self._advance_recv(op)]
        if self.stats.transitions != transitions_before:
            progressed = True

        return progressed

    def _dispatch_match(self, ep: Endpoint, packet: _Packet) -> None:
        envelope = packet.envelope
        with ep._match_lock:
            matched = None
            key = envelope.key()
            for idx, op in enumerate(ep.posted_recvs):
                if op.pattern == key:
                    matched = ep.posted_recvs.pop(idx)
                    break
            if matched is None:
                # Unexpected arrival: eager payloads are buffered by copy
                # into transport-owned storage, rendezvous leaves only the
                # envelope.
                if packet.kind is Protocol.EAGER:
                    self.stats.staging_copies += 1
                ep.unexpected.append(_Unexpected(envelope, packet.payload,
                                                 packet.sender_op))
                self.stats.unexpected_arrivals += 1
                return
        self._attach_match(matched, envelope, packet.payload,
                           packet.sender_op)

    def _advance_send(self, op: _SendOp) -> bool:
        """Advance one send machine; True when it finished and can drop."""
        state = op.state
        if state is SendState.LIGHTWEIGHT_DONE:
            if op.items[0].delivered:
                self._finish_send(op)  # request completed at isend already
                return True
        elif state is SendState.EAGER_WAIT_NIC:
            if op.items[0].delivered:
                self._finish_send(op, complete_request=True)
                return True
        elif state is SendState.RDV_WAIT_CTS:
            if op.cts_received:
                op.enter(SendState.RDV_WAIT_DATA)
                self.stats.transitions += 1
                self._submit_chunks(op)
        elif state is SendState.RDV_WAIT_DATA:
            self._submit_chunks(op)
            if op.next_offset >= op.length and \
                    all(item.delivered for item in op.items):
                self._finish_send(op, complete_request=True)
                return True
        return False

    def _submit_chunks(self, op: _SendOp) -> None:
        chunk = PIPELINE_CHUNK_BYTES if op.mode is SendMode.PIPELINE \
            else op.length
        cap = PIPELINE_MAX_IN_FLIGHT if op.mode is SendMode.PIPELINE else 1
        ep = self.endpoints[op.src]
        while op.next_offset < op.length:
            in_flight = sum(1 for item in op.items if not item.delivered)
            if in_flight >= cap:
                break
            size = min(chunk, op.length - op.next_offset)
            packet = _Packet(Protocol.RDV_DATA, op.envelope, op.dst,
                             recv_op=op.peer_recv_op, offset=op.next_offset)
            item = _NicItem(packet, self.clock() + self.latency.delay(size),
                            source_view=op.view[op.next_offset:
                                                op.next_offset + size])
            op.items.append(item)
            ep.nic.submit(item)
            self._trace(op.src, op.dst, op.envelope.tag, Protocol.RDV_DATA,
                        size, "SEND")
            op.next_offset += size

    def _finish_send(self, op: _SendOp, complete_request: bool = False) -> None:
        op.enter(SendState.COMPLETE)
        self.stats.transitions += 1
        self.stats.sends_completed += 1
        del self._sends_by_id[op.op_id]
        if complete_request:
            _complete_from_transport(op.request,
                                     Status(None, op.envelope.tag,
                                            op.length))
        self._trace(op.src, op.dst, op.envelope.tag, op.envelope.protocol,
                    op.length, "COMPLETE")

    def _advance_recv(self, op: _RecvOp) -> bool:
        state = op.state
        if state is RecvState.WAIT_EAGER:
            if op.eager_payload is not None:
                if op.error is None:
                    n = len(op.eager_payload)
                    op.view[:n] = op.eager_payload
                self._finish_recv(op)
                return True
            if op.rdv_sender_op is not None:
                # Reply clear-to-send exactly once, then await the payload.
                op.enter(RecvState.RDV_SEND_CTS)
                self.stats.transitions += 1
                env = op.matched_envelope
                cts_env = Envelope(op.rank, env.tag, env.context, 0,
                                   Protocol.CTS)
                ep = self.endpoints[op.rank]
                ep.nic.submit(_NicItem(
                    _Packet(Protocol.CTS, cts_env, env.source,
                            sender_op=op.rdv_sender_op, recv_op=op.op_id),
                    self.clock() + self.latency.delay(0)))
                self._trace(op.rank, env.source, env.tag, Protocol.CTS, 0,
                            "SEND")
        elif state is RecvState.RDV_SEND_CTS:
            op.enter(RecvState.RDV_WAIT_DATA)
            self.stats.transitions += 1
        elif state is RecvState.RDV_WAIT_DATA:
            if op.bytes_received >= op.expected >= 0:
                self._finish_recv(op)
                return True
        return False

    def _finish_recv(self, op: _RecvOp) -> None:
        op.enter(RecvState.COMPLETE)
        self.stats.transitions += 1
        self.stats.recvs_completed += 1
        del self._recvs_by_id[op.op_id]
        env = op.matched_envelope
        status = Status(env.source, env.tag, env.length)
        _complete_from_transport(op.request, status, error=op.error)
        self._trace(env.source, op.rank, env.tag, env.protocol, env.length,
                    "COMPLETE")

    def __repr__(self) -> str:  # pragma: no cover
        return f"<World size={self.size}>"


def state_history(request: Request) -> tuple:
    """State-machine history of a point-to-point request, for diagnostics."""
    op = request._op
    if op is None:
        return ()
    return tuple(op.history)
