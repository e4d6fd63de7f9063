"""Deterministic thread-pool mapping over independent work items."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

from .errors import ConfigError

THREADS_ENV = "HIER_DMF_THREADS"

_T = TypeVar("_T")
_R = TypeVar("_R")


def resolve_threads(cli_value: int | None) -> int:
    """Turn the --threads flag / environment variable into a worker count.

    Priority: explicit flag, then HIER_DMF_THREADS, then auto. 0 means
    auto (one worker per CPU).
    """
    value = cli_value
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env is not None:
            try:
                value = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV}={env!r} is not an integer")
        else:
            value = 0
    if value < 0:
        raise ConfigError(f"thread count must be >= 0, got {value}")
    if value == 0:
        return os.cpu_count() or 1
    return value


def parallel_map(fn: Callable[[_T], _R], items: Sequence[_T], threads: int) -> list[_R]:
    """Map fn over items, preserving order. Results are independent of the
    worker count because every item is computed in isolation and collected
    in input order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as ex:
        return list(ex.map(fn, items))
