"""Order-preserving parallel map over node batches."""

from __future__ import annotations

import logging
import os
from multiprocessing import cpu_count
from multiprocessing.pool import ThreadPool
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV = "OWNET_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def thread_count(env: Optional[dict] = None) -> int:
    """Worker count from ``OWNET_THREADS`` (default: all cores)."""
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return max(1, cpu_count())
    try:
        count = int(raw)
    except ValueError:
        logger.warning("ignoring %s=%r, running single-threaded", THREADS_ENV, raw)
        return 1
    if count < 1:
        logger.warning("ignoring %s=%r, running single-threaded", THREADS_ENV, raw)
        return 1
    return count


def ordered_map(
    worker: Callable[[T], R],
    items: Sequence[T],
    threads: Optional[int] = None,
    min_batch: int = 64,
) -> List[R]:
    """Apply ``worker`` to every item; results follow the input order.

    Items are split into contiguous batches, one per thread. Small inputs run
    inline so tiny graphs pay no pool start-up cost.
    """
    threads = thread_count() if threads is None else max(1, threads)
    if threads == 1 or len(items) < 2 * min_batch:
        return [worker(item) for item in items]
    batches = [
        [items[i] for i in batch]
        for batch in np.array_split(np.arange(len(items)), threads)
        if batch.size
    ]

    def run_batch(batch: List[T]) -> List[R]:
        return [worker(item) for item in batch]

    with ThreadPool(len(batches)) as pool:
        chunks = pool.map(run_batch, batches)
    return [result for chunk in chunks for result in chunk]
