"""Completion handles: side-effect-free queries, blocking wait, and
user-completed (generalized) requests.

The only sanctioned way to check a handle without driving any progress is
:func:`is_complete`; it reads the request's done flag and touches nothing
else.  :func:`wait` loops one progress pass at a time on a caller-supplied
stream until the flag flips.

A generalized request is completed by user code via
:func:`grequest_complete`; the query callback fills its status exactly once
at that point, and the free callback runs exactly once when the handle is
destroyed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .engine import Stream


class RequestKind(Enum):
    P2P_SEND = "p2p_send"
    P2P_RECV = "p2p_recv"
    GENERALIZED = "generalized"


@dataclass(frozen=True, slots=True)
class Status:
    """Completion status: source and tag are None for sends."""

    source: Optional[int]
    tag: Optional[int]
    length: int


EMPTY_STATUS = Status(None, None, 0)

QueryCallback = Callable[[Any], Optional[Status]]
FreeCallback = Callable[[Any], None]
CancelCallback = Callable[[Any, bool], None]


class RequestError(RuntimeError):
    """Base class for request usage errors."""


class InvalidRequestError(RequestError):
    """Operation on a freed or otherwise invalid handle."""


class RequestFailedError(RequestError):
    """The operation behind the request completed with an error."""


_request_ids = itertools.count(1)


class Request:
    """A completion handle with an atomically readable done flag.

    ``done`` flips false to true exactly once and never reverts.  The status
    fields are written before the flag, so a reader observing ``done`` also
    observes the completed status (CPython attribute reads and writes are
    individually atomic; the write order here provides the publish/observe
    contract).
    """

    __slots__ = ("request_id", "kind", "done", "status", "error",
                 "owner_stream", "_query_cb", "_free_cb", "_cancel_cb",
                 "_user_state", "_freed", "_destroyed", "_op")

    def __init__(self, kind: RequestKind,
                 owner_stream: Optional[int] = None) -> None:
        self.request_id = next(_request_ids)
        self.kind = kind
        self.done = False
        self.status: Status = EMPTY_STATUS
        self.error: Optional[str] = None
        self.owner_stream = owner_stream
        self._query_cb: Optional[QueryCallback] = None
        self._free_cb: Optional[FreeCallback] = None
        self._cancel_cb: Optional[CancelCallback] = None
        self._user_state: Any = None
        self._freed = False
        self._destroyed = False
        self._op: Any = None  # transport-side state machine, if any

    def __repr__(self) -> str:  # pragma: no cover
        state = "done" if self.done else "pending"
        return f"<Request {self.request_id} {self.kind.value} {state}>"


def is_complete(request: Request) -> bool:
    """Return the request's done flag without advancing any progress."""
    if request._freed:
        raise InvalidRequestError("request was freed")
    return request.done


def wait(request: Request, stream: "Stream") -> Status:
    """Block until the request completes, driving *stream*'s progress.

    Returns the completion status and frees the request.  An
    already-complete request returns immediately with zero progress passes.
    Raises :class:`RequestFailedError` if the operation failed.
    """
    if request._freed:
        raise InvalidRequestError("request was freed")
    if not request.done:
        engine = stream.engine
        progress = engine.stream_progress
        while not request.done:
            progress(stream)
    status = request.status
    error = request.error
    free(request)
    if error is not None:
        raise RequestFailedError(error)
    return status


def grequest_start(query_cb: QueryCallback, free_cb: FreeCallback,
                   cancel_cb: CancelCallback,
                   user_state: Any = None) -> Request:
    """Create a generalized request; completion is up to the caller.

    All three callbacks must be supplied (no-op callbacks are fine).  The
    cancel callback is stored for interface completeness; there is no cancel
    operation.
    """
    if query_cb is None or free_cb is None or cancel_cb is None:
        raise ValueError("generalized requests need query, free, and "
                         "cancel callbacks (no-ops are allowed)")
    request = Request(RequestKind.GENERALIZED)
    request._query_cb = query_cb
    request._free_cb = free_cb
    request._cancel_cb = cancel_cb
    request._user_state = user_state
    return request


def grequest_complete(request: Request) -> None:
    """Mark a generalized request complete.

    Invokes the query callback to fill the status, then publishes the done
    flag.  Completing twice is an error.  Safe to call from inside a poll
    hook; waiters observe the flag on their next read.
    """
    if request.kind is not RequestKind.GENERALIZED:
        raise RequestError("not a generalized request")
    if request.done:
        raise RequestError("request already complete")
    status = request._query_cb(request._user_state)
    request.status = status if status is not None else EMPTY_STATUS
    request.done = True
    if request._freed:
        _destroy(request)


def free(request: Request) -> None:
    """Invalidate the handle for the caller.

    A pending operation keeps running; its destruction is deferred until
    completion.  Freeing twice is an error.
    """
    if request._freed:
        raise InvalidRequestError("double free of request")
    request._freed = True
    if request.done:
        _destroy(request)


def _destroy(request: Request) -> None:
    if request._destroyed:
        return
    request._destroyed = True
    request._op = None
    if request.kind is RequestKind.GENERALIZED and request._free_cb:
        cb = request._free_cb
        request._free_cb = None
        cb(request._user_state)


def _complete_from_transport(request: Request, status: Status,
                             error: Optional[str] = None) -> None:
    """Transport-side completion: publish status, then the done flag."""
    request.status = status
    request.error = error
    request.done = True
    if request._freed:
        _destroy(request)
