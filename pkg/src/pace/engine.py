"""Streams, poll-hook tasks, and the collated progress loop.

A :class:`Stream` is a serial execution context: an ordered registry of
pending :class:`AsyncTask` records guarded by one exclusion scope.  Calling
:meth:`Engine.stream_progress` runs a single collated pass for one stream:
registered subsystem hooks are polled in ascending order (stopping early as
soon as one reports progress), then every task registered on the stream is
polled exactly once, in FIFO registration order, removing tasks whose hook
returns :data:`DONE`.

Progress on different streams is fully parallel (streams share no locks on
the hot path); concurrent progress on the same stream serializes through the
stream's own lock.  Calling progress from inside a poll hook is a hard error.
"""

from __future__ import annotations

import itertools
import threading
from enum import Enum
from typing import Any, Callable, Iterable, Optional


class PollOutcome(Enum):
    """Result of one poll-hook invocation."""

    DONE = "done"
    PENDING = "pending"


DONE = PollOutcome.DONE
PENDING = PollOutcome.PENDING


class EngineError(RuntimeError):
    """Base class for progress-engine usage errors."""


class ProgressRecursionError(EngineError):
    """Raised when stream_progress is invoked from inside a poll hook."""


class StreamStateError(EngineError):
    """Raised on invalid stream usage (freed stream, busy free, ...)."""


PollHook = Callable[["AsyncTask"], PollOutcome]
SubsystemPoll = Callable[[], bool]


class AsyncTask:
    """Engine-side record for one registered task.

    This object is the opaque handle passed to the task's poll hook.  The
    hook retrieves its own context with :func:`get_state` and may stage
    child tasks with :func:`spawn`; staged children are registered after the
    hook returns and are first polled in the following pass.
    """

    __slots__ = ("task_id", "poll_hook", "user_state", "owner",
                 "spawn_buffer", "_prev", "_next")

    def __init__(self, task_id: int, poll_hook: PollHook, user_state: Any,
                 owner: int) -> None:
        self.task_id = task_id
        self.poll_hook = poll_hook
        self.user_state = user_state
        self.owner = owner
        self.spawn_buffer: list[tuple[PollHook, Any, "Stream"]] = []
        self._prev: Optional[AsyncTask] = None
        self._next: Optional[AsyncTask] = None

    def __repr__(self) -> str:  # pragma: no cover
        return f"<AsyncTask {self.task_id} on stream {self.owner}>"


def get_state(task: AsyncTask) -> Any:
    """Return the user state passed at registration, unchanged.

    Meant to be called from within the task's own poll hook.
    """
    return task.user_state


def spawn(task: AsyncTask, poll_hook: PollHook, user_state: Any,
          stream: "Stream") -> None:
    """Stage a child task from within a running poll hook.

    The triple is buffered on the calling task and appended to the target
    stream's registry after the current hook returns; the child is not
    polled in the pass that spawned it.
    """
    if poll_hook is None:
        raise ValueError("poll_hook must not be None")
    if stream is None or stream.freed:
        raise StreamStateError("spawn target is not a valid stream")
    task.spawn_buffer.append((poll_hook, user_state, stream))


class SubsystemHook:
    """A built-in progress hook polled at a fixed position in every pass."""

    __slots__ = ("name", "poll", "order", "calls", "progress_reports")

    def __init__(self, name: str, poll: SubsystemPoll, order: int) -> None:
        self.name = name
        self.poll = poll
        self.order = order
        self.calls = 0
        self.progress_reports = 0

    def __repr__(self) -> str:  # pragma: no cover
        return f"<SubsystemHook {self.name!r} order={self.order}>"


# Conventional hook positions: collective-style subsystems poll early and
# cheaply, the transport polls last so it can be skipped once anything else
# has progressed.
COLLECTIVE_HOOK_ORDER = 10
TRANSPORT_HOOK_ORDER = 100

_SKIP_PREFIXES = ("skip_subsystem:", "skip_")


def _skip_set(hints: dict[str, str]) -> frozenset[str]:
    skip = set()
    for key, value in hints.items():
        if value != "true":
            continue
        for prefix in _SKIP_PREFIXES:
            if key.startswith(prefix):
                skip.add(key[len(prefix):])
                break
    return frozenset(skip)


class Stream:
    """A serial execution context owning an ordered task registry.

    The registry is a doubly linked list so a retired task can be unlinked
    immediately, mid-pass, keeping the registry length equal to the pending
    count at all times.
    """

    __slots__ = ("stream_id", "engine", "hints", "freed", "passes",
                 "task_polls", "_skip", "_lock", "_head", "_tail", "_count")

    def __init__(self, stream_id: int, engine: "Engine",
                 hints: Optional[dict[str, str]] = None) -> None:
        self.stream_id = stream_id
        self.engine = engine
        self.hints: dict[str, str] = dict(hints) if hints else {}
        self.freed = False
        self.passes = 0
        self.task_polls = 0
        self._skip = _skip_set(self.hints)
        self._lock = threading.RLock()
        self._head: Optional[AsyncTask] = None
        self._tail: Optional[AsyncTask] = None
        self._count = 0

    @property
    def pending_tasks(self) -> int:
        """Number of tasks currently registered on this stream."""
        return self._count

    def _link_tail(self, task: AsyncTask) -> None:
        tail = self._tail
        if tail is None:
            self._head = task
        else:
            tail._next = task
            task._prev = tail
        self._tail = task
        self._count += 1

    def _unlink(self, task: AsyncTask) -> None:
        prev, nxt = task._prev, task._next
        if prev is None:
            self._head = nxt
        else:
            prev._next = nxt
        if nxt is None:
            self._tail = prev
        else:
            nxt._prev = prev
        task._prev = task._next = None
        self._count -= 1

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Stream {self.stream_id} pending={self._count}>"


class ProgressTrace:
    """Runtime-enabled trace of hook and task activity.

    Each event is a ``(pass_no, stream_id, kind, ident, outcome)`` tuple with
    ``kind`` in {"hook", "task"}; hooks record "progress"/"idle", tasks
    record "done"/"pending".
    """

    __slots__ = ("events",)

    def __init__(self) -> None:
        self.events: list[tuple[int, int, str, Any, str]] = []

    def _add(self, pass_no: int, stream_id: int, kind: str, ident: Any,
             outcome: str) -> None:
        self.events.append((pass_no, stream_id, kind, ident, outcome))

    def task_events(self) -> list[tuple[int, int, str, Any, str]]:
        return [e for e in self.events if e[2] == "task"]

    def hook_events(self) -> list[tuple[int, int, str, Any, str]]:
        return [e for e in self.events if e[2] == "hook"]

    def clear(self) -> None:
        self.events.clear()


class Engine:
    """Owns streams and the global ordered list of subsystem hooks."""

    def __init__(self) -> None:
        self._stream_ids = itertools.count(1)
        self._task_ids = itertools.count(1)
        self._hooks: tuple[SubsystemHook, ...] = ()
        self._hooks_lock = threading.Lock()
        self._tls = threading.local()
        self.trace: Optional[ProgressTrace] = None
        self.null_stream = Stream(0, self)

    # -- streams -----------------------------------------------------------

    def stream_create(self, hints: Optional[dict[str, str]] = None) -> Stream:
        """Create a fresh stream with an empty registry.

        Recognized hint keys are ``skip_subsystem:<name>`` (and the short
        form ``skip_<name>``) with value ``"true"``, which exclude the named
        subsystem hook from this stream's passes.  Unrecognized keys are
        stored but ignored.
        """
        return Stream(next(self._stream_ids), self, hints)

    def stream_free(self, stream: Stream) -> None:
        """Invalidate a stream.  The stream must be idle.

        Freeing the default stream or a stream that still has pending tasks
        is an error; the latter signals a task leak.
        """
        if stream is self.null_stream:
            raise StreamStateError("cannot free default stream")
        with stream._lock:
            if stream.freed:
                raise StreamStateError("stream already freed")
            if stream._count:
                raise StreamStateError(
                    f"stream has {stream._count} pending tasks")
            stream.freed = True

    # -- tasks -------------------------------------------------------------

    def async_start(self, poll_hook: PollHook, user_state: Any = None,
                    stream: Optional[Stream] = None) -> AsyncTask:
        """Register a task; its hook runs once per pass until it is DONE."""
        if poll_hook is None:
            raise ValueError("poll_hook must not be None")
        if stream is None:
            stream = self.null_stream
        if stream.freed:
            raise StreamStateError("cannot register a task on a freed stream")
        task = AsyncTask(next(self._task_ids), poll_hook, user_state,
                         stream.stream_id)
        with stream._lock:
            stream._link_tail(task)
        return task

    # -- subsystem hooks ----------------------------------------------------

    def register_subsystem_hook(self, name: str, poll: SubsystemPoll,
                                order: int) -> SubsystemHook:
        """Install a hook at a unique order position in the collated pass."""
        with self._hooks_lock:
            if any(h.order == order for h in self._hooks):
                raise ValueError(f"duplicate subsystem hook order {order}")
            hook = SubsystemHook(name, poll, order)
            self._hooks = tuple(sorted(self._hooks + (hook,),
                                       key=lambda h: h.order))
            return hook

    def subsystem_hooks(self) -> tuple[SubsystemHook, ...]:
        return self._hooks

    # -- instrumentation -----------------------------------------------------

    def enable_trace(self) -> ProgressTrace:
        self.trace = ProgressTrace()
        return self.trace

    def disable_trace(self) -> None:
        self.trace = None

    def snapshot_counters(self) -> dict[str, int]:
        """Copy of the always-on progress counters, for purity checks."""
        counters = {f"hook:{h.name}:calls": h.calls for h in self._hooks}
        counters.update(
            {f"hook:{h.name}:progress": h.progress_reports
             for h in self._hooks})
        return counters

    # -- progress ------------------------------------------------------------

    def stream_progress(self, stream: Stream) -> bool:
        """Run one collated pass for *stream*; return whether anything moved.

        Must not be called from inside a poll hook; doing so raises
        :class:`ProgressRecursionError` deterministically.
        """
        tls = self._tls
        if getattr(tls, "active", False):
            raise ProgressRecursionError(
                "progress recursion: stream_progress called from a poll hook")
        if stream.freed:
            raise StreamStateError("cannot progress a freed stream")
        deferred: list[tuple[Stream, PollHook, Any]] = []
        lock = stream._lock
        lock.acquire()
        tls.active = True
        try:
            made = self._run_pass(stream, deferred)
        finally:
            tls.active = False
            lock.release()
        # Cross-stream spawns are applied only after this stream's lock is
        # dropped so two passes can never wait on each other's locks.
        for target, hook_fn, state in deferred:
            self.async_start(hook_fn, state, target)
        return made

    def _run_pass(self, stream: Stream,
                  deferred: list[tuple[Stream, PollHook, Any]]) -> bool:
        stream.passes += 1
        pass_no = stream.passes
        stream_id = stream.stream_id
        trace = self.trace
        made = False

        skip = stream._skip
        for hook in self._hooks:
            if skip and hook.name in skip:
                continue
            hook.calls += 1
            progressed = hook.poll()
            if trace is not None:
                trace._add(pass_no, stream_id, "hook", hook.name,
                           "progress" if progressed else "idle")
            if progressed:
                hook.progress_reports += 1
                made = True
                break

        task = stream._head
        if task is not None:
            stop = stream._tail  # tasks appended mid-pass wait for the next
            polls = 0
            while True:
                nxt = task._next
                outcome = task.poll_hook(task)
                polls += 1
                if trace is not None:
                    trace._add(pass_no, stream_id, "task", task.task_id,
                               "done" if outcome is DONE else "pending")
                if task.spawn_buffer:
                    spawns = task.spawn_buffer
                    task.spawn_buffer = []
                    for hook_fn, state, target in spawns:
                        if target is stream:
                            stream._link_tail(AsyncTask(
                                next(self._task_ids), hook_fn, state,
                                stream_id))
                        else:
                            deferred.append((target, hook_fn, state))
                if outcome is DONE:
                    stream._unlink(task)
                    made = True
                if task is stop:
                    break
                task = nxt
            stream.task_polls += polls
        return made

    # -- convenience ----------------------------------------------------------

    def drive(self, stream: Optional[Stream] = None, *,
              until: Callable[[], bool], max_passes: int = 10_000_000) -> int:
        """Spin stream_progress until *until()* is true; return pass count."""
        if stream is None:
            stream = self.null_stream
        passes = 0
        while not until():
            if passes >= max_passes:
                raise EngineError("progress did not converge "
                                  f"within {max_passes} passes")
            self.stream_progress(stream)
            passes += 1
        return passes

    def __repr__(self) -> str:  # pragma: no cover
        return f"<Engine hooks={[h.name for h in self._hooks]}>"


def drain_stream(engine: Engine, stream: Stream,
                 max_passes: int = 10_000_000) -> int:
    """Spin progress until the stream's registry is empty."""
    return engine.drive(stream, until=lambda: stream.pending_tasks == 0,
                        max_passes=max_passes)
