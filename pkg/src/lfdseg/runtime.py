"""Worker-thread configuration.

Kernels split their output into work items of a fixed size that does not
depend on the worker count, so any pool size computes exactly the same
arithmetic on disjoint output regions and results are bit-identical for
1..N workers. BLAS is pinned to a single thread per call for the same
reason: its internal reduction order must not vary underneath us.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

try:
    from threadpoolctl import threadpool_limits

    _BLAS_LIMIT = threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is a hard dep normally
    _BLAS_LIMIT = None

# Output rows per conv/pool work item. Fixed: never derived from the pool size.
ROW_BLOCK = 16

_threads = 0  # 0 = uninitialised, resolve from env on first use
_pool: ThreadPoolExecutor | None = None


def default_threads() -> int:
    """Thread count from LFD_THREADS, else 1."""
    raw = os.environ.get("LFD_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def set_threads(n: int) -> None:
    """Set the worker count for subsequent kernel calls."""
    global _threads, _pool
    n = max(1, int(n))
    if n == _threads:
        return
    if _pool is not None:
        _pool.shutdown(wait=True)
        _pool = None
    _threads = n
    if n > 1:
        _pool = ThreadPoolExecutor(max_workers=n)


def get_threads() -> int:
    if _threads == 0:
        set_threads(default_threads())
    return _threads


def parallel_for(items, fn) -> None:
    """Run fn over items, on the pool when more than one worker is set.

    Work items must write to disjoint regions; nothing is returned.
    """
    if get_threads() == 1 or len(items) <= 1:
        for item in items:
            fn(item)
    else:
        # list() propagates the first worker exception.
        list(_pool.map(fn, items))


def row_blocks(rows: int) -> list[tuple[int, int]]:
    """Split [0, rows) into fixed-size half-open blocks."""
    return [(y, min(y + ROW_BLOCK, rows)) for y in range(0, rows, ROW_BLOCK)]
