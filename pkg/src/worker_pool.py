"""
Worker pool for independent numerical tasks
Bounds concurrent per-N Nash runs and oracle grid evaluations; tracks statistics like a request queue
"""

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, TypeVar

from .config import get_settings
from .logger import get_logger


# ============================================================================
# Logger
# ============================================================================

logger = get_logger("mfg_solver.pool")

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class PoolStats:
    """Pool statistics"""
    active_tasks: int
    queued_tasks: int
    total_processed: int
    average_task_time_ms: int
    max_workers: int


class WorkerPool:
    """
    Runs independent tasks on a bounded thread pool
    Results come back in submission order, so outputs do not depend on scheduling
    """

    def __init__(self, max_workers: int = 1):
        """
        Initialize worker pool

        Args:
            max_workers: Maximum concurrently running tasks
        """
        self._max_workers = max_workers
        self._executor = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="mfg-worker")

        self._active_tasks = 0
        self._queued_tasks = 0
        self._total_processed = 0
        self._total_task_time_ms = 0.0

        self._stats_lock = threading.Lock()

    def _run(self, label: str, fn: Callable[[T], R], item: T) -> R:
        with self._stats_lock:
            self._queued_tasks -= 1
            self._active_tasks += 1
        start = time.perf_counter()
        try:
            return fn(item)
        finally:
            elapsed_ms = (time.perf_counter() - start) * 1000
            with self._stats_lock:
                self._active_tasks -= 1
                self._total_processed += 1
                self._total_task_time_ms += elapsed_ms
            logger.debug(
                "Task finished",
                extra={"extra": {"label": label, "elapsed_ms": round(elapsed_ms, 1)}}
            )

    def map(self, label: str, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """
        Apply fn to every item on the pool

        Args:
            label: Name used in log records
            fn: Pure function of one item
            items: Work items

        Returns:
            Results in the order of `items`

        Raises:
            Exception: The first task exception, re-raised after all tasks settle
        """
        items = list(items)
        if self._max_workers == 1 or len(items) <= 1:
            with self._stats_lock:
                self._queued_tasks += len(items)
            return [self._run(label, fn, item) for item in items]

        with self._stats_lock:
            self._queued_tasks += len(items)
        futures = [self._executor.submit(self._run, label, fn, item) for item in items]

        results: List[R] = []
        first_error: BaseException | None = None
        for future in futures:
            try:
                results.append(future.result())
            except BaseException as e:  # settle every future before re-raising
                if first_error is None:
                    first_error = e
        if first_error is not None:
            raise first_error
        return results

    def get_stats(self) -> PoolStats:
        """
        Get current pool statistics

        Returns:
            PoolStats with current state
        """
        with self._stats_lock:
            avg = (
                int(self._total_task_time_ms // self._total_processed)
                if self._total_processed > 0
                else 0
            )
            return PoolStats(
                active_tasks=self._active_tasks,
                queued_tasks=self._queued_tasks,
                total_processed=self._total_processed,
                average_task_time_ms=avg,
                max_workers=self._max_workers
            )

    def shutdown(self) -> None:
        """Stop accepting work and join the worker threads"""
        self._executor.shutdown(wait=True)


# Singleton instance
_worker_pool: WorkerPool | None = None
_pool_lock = threading.Lock()


def configure_worker_pool(threads: int) -> WorkerPool:
    """
    Replace the singleton pool with one of the given size

    Args:
        threads: Worker count (the `threads` config key)
    """
    global _worker_pool
    with _pool_lock:
        if _worker_pool is not None:
            _worker_pool.shutdown()
        _worker_pool = WorkerPool(max_workers=threads)
    logger.info("Worker pool configured", extra={"extra": {"threads": threads}})
    return _worker_pool


def get_worker_pool() -> WorkerPool:
    """Get singleton worker pool instance, sized from settings on first use"""
    global _worker_pool
    with _pool_lock:
        if _worker_pool is None:
            _worker_pool = WorkerPool(max_workers=get_settings().threads)
        return _worker_pool
