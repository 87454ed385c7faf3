"""Order-preserving parallel map used for every per-commit read."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import FIRST_EXCEPTION, Future, ThreadPoolExecutor, wait
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")

log = logging.getLogger(__name__)


def ordered_map(func: Callable[[T], R], items: Sequence[T], workers: int = 1) -> list[R]:
    """Apply ``func`` to every item and return results in input order.

    Workers are threads: the per-item work is dominated by git subprocesses,
    which release the GIL while waiting. With ``workers == 1`` the map runs
    inline, which is the reference behaviour every parallel run must equal.

    On failure, work already running is allowed to finish, queued work is
    cancelled, and the failure with the lowest input index is re-raised.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if not items:
        return []
    if workers == 1 or len(items) == 1:
        return [func(item) for item in items]

    results: list[R | None] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        futures: list[Future[R]] = [pool.submit(func, item) for item in items]
        done, pending = wait(futures, return_when=FIRST_EXCEPTION)
        if pending and any(f.exception() is not None for f in done):
            for f in pending:
                f.cancel()
            wait(pending)
        for idx, fut in enumerate(futures):
            if fut.cancelled():
                continue
            exc = fut.exception()
            if exc is not None:
                log.debug("task %d failed: %s", idx, exc)
                raise exc
            results[idx] = fut.result()
    return results  # type: ignore[return-value]
