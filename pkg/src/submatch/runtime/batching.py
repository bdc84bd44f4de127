"""Prefix-level batching: split the batching vertex's candidates and run the
sub-executions one after another."""
from __future__ import annotations

import math
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")


def split_candidates(candidates: Sequence[int], batch_size: int) -> list[frozenset[int]]:
    """``ceil(|C| / batch_size)`` disjoint chunks of the sorted candidate set."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    cands = sorted(set(candidates))
    if not cands:
        return [frozenset()]
    k = math.ceil(len(cands) / batch_size)
    return [frozenset(cands[i * batch_size:(i + 1) * batch_size]) for i in range(k)]


def batch_driver(candidates: Sequence[int], batch_size: int, run_batch: Callable[[frozenset[int]], T]) -> list[T]:
    """Run ``run_batch`` sequentially on each candidate chunk."""
    return [run_batch(chunk) for chunk in split_candidates(candidates, batch_size)]
