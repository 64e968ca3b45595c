"""Benchmark configuration and the flat key=value config-file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Malformed or inconsistent benchmark configuration."""


@dataclass
class BenchConfig:
    """Knobs shared by all scenarios; each scenario reads the ones it needs.

    ``task_duration_s`` follows the classic one-second dummy-task default;
    desk-scale runs override it to a few milliseconds.
    """

    scenario: str = ""
    num_tasks: int = 1024
    task_duration_s: float = 1.0
    poll_delay_us: float = 0.0
    num_threads: int = 8
    use_per_stream: bool = True
    num_requests: int = 1024
    world_size: int = 16
    count: int = 1
    repetitions: int = 3
    seed: int = 12345

    def validate(self) -> None:
        for name in ("num_tasks", "num_threads", "num_requests",
                     "world_size", "count", "repetitions"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.task_duration_s < 0:
            raise ConfigError("task_duration_s must be non-negative")
        if self.poll_delay_us < 0:
            raise ConfigError("poll_delay_us must be non-negative")


_FIELDS = {f.name: f.type for f in dataclasses.fields(BenchConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELDS[key]
    if kind == "bool":
        lowered = raw.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean {key}={raw!r}")
    if kind == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"cannot parse integer {key}={raw!r}") from exc
    if kind == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"cannot parse number {key}={raw!r}") from exc
    return raw


def load_config(path: str | Path,
                base: BenchConfig | None = None) -> BenchConfig:
    """Load ``key=value`` lines into a config; unknown keys are errors."""
    config = dataclasses.replace(base) if base else BenchConfig()
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, "
                              f"got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        setattr(config, key, _coerce(key, raw.strip()))
    config.validate()
    return config
