"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from pace import Engine, World, VirtualClock


@pytest.fixture
def engine() -> Engine:
    return Engine()


@pytest.fixture
def pair_world(engine):
    """Two-rank world on a deterministic clock."""
    return World(engine, 2, clock=VirtualClock())


def drive_until(engine, predicate, stream=None, max_passes=1_000_000):
    """Spin progress until *predicate()*; return the number of passes."""
    stream = stream if stream is not None else engine.null_stream
    passes = 0
    while not predicate():
        assert passes < max_passes, "progress did not converge"
        engine.stream_progress(stream)
        passes += 1
    return passes


def sequential_sum(vectors) -> np.ndarray:
    """Independent elementwise-sum oracle: plain left-to-right addition."""
    total = np.array(vectors[0], dtype=np.int64)
    for vec in vectors[1:]:
        total = total + np.array(vec, dtype=np.int64)
    return total.astype(np.int32)  # wraps like the 32-bit runtime does
