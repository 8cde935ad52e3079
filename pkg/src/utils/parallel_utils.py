"""Deterministic parallel map.

Workers may finish in any order; results are always returned in input
order, so aggregated outputs do not depend on the thread count.
"""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    func: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
) -> list[R]:
    """Apply ``func`` to every item, possibly in parallel, preserving order.

    Args:
        func: Function applied to each item.
        items: Inputs.
        threads: Maximum number of worker threads; 1 runs inline.

    Returns:
        Results indexed like ``items``.
    """
    work = list(items)
    if threads <= 1 or len(work) <= 1:
        return [func(item) for item in work]

    results: list[R | None] = [None] * len(work)
    with ThreadPoolExecutor(max_workers=min(threads, len(work))) as pool:
        futures = {pool.submit(func, item): index for index, item in enumerate(work)}
        for future, index in futures.items():
            results[index] = future.result()
    return results  # type: ignore[return-value]
