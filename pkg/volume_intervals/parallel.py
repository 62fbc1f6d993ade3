"""Order-preserving parallel map over a spawn-context process pool."""
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

import psutil

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def default_workers() -> int:
    """Number of physical cores, or 1 when it cannot be determined."""
    return psutil.cpu_count(logical=False) or 1


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = 1) -> List[R]:
    """Applies ``func`` to every item and returns results in input order.

    Args:
        func: A picklable top-level function.
        items: Inputs.
        workers: Process count; ``None`` means all physical cores, ``<= 1`` runs inline.

    Returns:
        ``[func(item) for item in items]``, computed in parallel when requested.
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    n_workers = min(workers, len(items))
    logger.debug("Dispatching %d tasks to %d worker processes", len(items), n_workers)
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=n_workers, mp_context=ctx) as executor:
        return list(executor.map(func, items))


def chunk_ranges(n: int, n_chunks: int) -> List[range]:
    """Splits ``range(n)`` into at most ``n_chunks`` contiguous non-empty ranges."""
    n_chunks = max(1, min(n_chunks, n))
    bounds = [round(i * n / n_chunks) for i in range(n_chunks + 1)]
    return [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
