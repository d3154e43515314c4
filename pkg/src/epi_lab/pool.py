"""Ordered parallel map capped by ``EPI_LAB_THREADS`` (default: serial)."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_VAR = "EPI_LAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return n


def pmap(fn, items):
    """``[fn(x) for x in items]``, spread over worker processes when allowed.

    Results always come back in input order, so anything assembled from
    them is independent of the worker count.
    """
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
