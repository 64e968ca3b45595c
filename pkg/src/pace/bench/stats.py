"""Latency sample accumulation and summary statistics."""

from __future__ import annotations

import numpy as np


class LatencyStats:
    """Accumulates latency samples in seconds; summaries in microseconds.

    Every derived figure is recomputed from the raw samples, and the sample
    count is part of the summary so nothing is dropped silently.
    """

    __slots__ = ("samples",)

    def __init__(self) -> None:
        self.samples: list[float] = []

    def add(self, seconds: float) -> None:
        self.samples.append(seconds)

    def extend(self, seconds_iter) -> None:
        self.samples.extend(seconds_iter)

    @property
    def count(self) -> int:
        return len(self.samples)

    def _us(self) -> np.ndarray:
        return np.asarray(self.samples, dtype=np.float64) * 1e6

    @property
    def mean_us(self) -> float:
        return float(np.mean(self._us())) if self.samples else 0.0

    @property
    def p50_us(self) -> float:
        return float(np.percentile(self._us(), 50)) if self.samples else 0.0

    @property
    def p99_us(self) -> float:
        return float(np.percentile(self._us(), 99)) if self.samples else 0.0

    def __repr__(self) -> str:  # pragma: no cover
        return (f"LatencyStats(n={self.count}, mean={self.mean_us:.3f}us, "
                f"p99={self.p99_us:.3f}us)")
