"""Deterministic data-parallel mapping; only the CLI creates pools.

Work is always expressed as an ordered list of independent tasks, and
results are collected in task order, so the outputs are identical for
any worker count (the determinism contract of the CLI).
"""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor


def resolve_workers(requested: int | None) -> int:
    """Default to the machine's core count; explicit values are validated."""
    if requested is None:
        return os.cpu_count() or 1
    if requested < 1:
        raise ValueError(f"worker count must be >= 1, got {requested}")
    return requested


def pmap(fn, tasks, workers: int = 1, initializer=None, initargs=()):
    """Map fn over tasks, returning results in task order.

    workers == 1 runs serially in-process (the reference path); more
    workers use a process pool. fn and tasks must be picklable for the
    pooled path. The fork start method keeps startup cheap and lets
    workers inherit read-only state prepared before the pool exists.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(task) for task in tasks]
    methods = mp.get_all_start_methods()
    ctx = mp.get_context("fork" if "fork" in methods else None)
    with ProcessPoolExecutor(
        max_workers=min(workers, len(tasks)),
        mp_context=ctx,
        initializer=initializer,
        initargs=initargs,
    ) as pool:
        return list(pool.map(fn, tasks))
