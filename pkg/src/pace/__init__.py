"""pace: an explicit progress engine with poll-hook tasks, side-effect-free
completion queries, an in-process eager/rendezvous message transport, and a
user-level recursive-doubling allreduce.

Quick start::

    from pace import Engine, DONE, PENDING, get_state

    engine = Engine()

    def poll(task):
        print("state:", get_state(task))
        return DONE

    engine.async_start(poll, "hello")
    engine.stream_progress(engine.null_stream)
"""

from .clock import VirtualClock, wall_clock
from .engine import (AsyncTask, DONE, Engine, EngineError, PENDING,
                     PollOutcome, ProgressRecursionError, ProgressTrace,
                     Stream, StreamStateError, SubsystemHook, get_state,
                     spawn)
from .request import (InvalidRequestError, Request, RequestError,
                      RequestFailedError, RequestKind, Status, free,
                      grequest_complete, grequest_start, is_complete, wait)
from .transport import (Endpoint, Envelope, LatencyModel, Protocol,
                        RecvState, SendMode, SendState, SimulatedNic,
                        TransportError, World, state_history, wait_states)
from .collective import (ALLREDUCE_TAG, CollectiveError, CollectiveHandle,
                         allreduce_blocking, allreduce_start,
                         baseline_allreduce, baseline_allreduce_start)

__version__ = "0.1.0"

__all__ = [
    "ALLREDUCE_TAG", "AsyncTask", "CollectiveError", "CollectiveHandle",
    "DONE", "Endpoint", "Engine", "EngineError", "Envelope",
    "InvalidRequestError", "LatencyModel", "PENDING", "PollOutcome",
    "ProgressRecursionError", "ProgressTrace", "Protocol", "RecvState",
    "Request", "RequestError", "RequestFailedError", "RequestKind",
    "SendMode", "SendState", "SimulatedNic", "Status", "Stream",
    "StreamStateError", "SubsystemHook", "TransportError", "VirtualClock",
    "World", "allreduce_blocking", "allreduce_start", "baseline_allreduce",
    "baseline_allreduce_start", "free", "get_state", "grequest_complete",
    "grequest_start", "is_complete", "spawn", "state_history", "wait",
    "wait_states", "wall_clock",
]
