"""Per-match constraints: injectivity, the symmetry-breaking order and labels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .query import PartialOrder, QueryGraph, symmetry_break_order


@dataclass(frozen=True)
class MatchConstraints:
    """``below[v]`` lists query vertices ``x`` with ``f(x) < f(v)`` required,
    ``above[v]`` those with ``f(v) < f(x)``. Built from the transitive closure
    so any subset of matched vertices can be checked on its own."""

    n: int
    below: tuple[tuple[int, ...], ...]
    above: tuple[tuple[int, ...], ...]
    labels: Optional[tuple[Optional[int], ...]] = None

    @classmethod
    def from_order(cls, n: int, order: Optional[PartialOrder], labels=None) -> "MatchConstraints":
        below: list[list[int]] = [[] for _ in range(n)]
        above: list[list[int]] = [[] for _ in range(n)]
        if order is not None:
            for a, b in sorted(order.closure()):
                below[b].append(a)
                above[a].append(b)
        lab = None
        if labels is not None and any(l is not None for l in labels):
            lab = tuple(labels)
        return cls(n, tuple(map(tuple, below)), tuple(map(tuple, above)), lab)

    @classmethod
    def for_query(cls, q: QueryGraph, order: Optional[PartialOrder] = None) -> "MatchConstraints":
        """Labelled queries drop the order; unlabelled ones use ``order`` or
        the symmetry-breaking order of ``q``."""
        if q.labelled:
            return cls.from_order(q.n, None, q.labels)
        return cls.from_order(q.n, order if order is not None else symmetry_break_order(q))

    @property
    def has_order(self) -> bool:
        return any(self.below)

    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a in range(self.n) for b in self.above[a]]

    def label_ok(self, v: int, u: int, data_labels: Optional[Sequence[int]]) -> bool:
        if self.labels is None or self.labels[v] is None:
            return True
        return data_labels is not None and data_labels[u] == self.labels[v]

    def order_ok(self, v: int, u: int, assigned: dict[int, int]) -> bool:
        """Check ``f(v) = u`` against already assigned concrete vertices."""
        for x in self.below[v]:
            fx = assigned.get(x)
            if fx is not None and not fx < u:
                return False
        for x in self.above[v]:
            fx = assigned.get(x)
            if fx is not None and not u < fx:
                return False
        return True

    def full_match_ok(self, f: Sequence[int]) -> bool:
        if len(set(f)) != len(f):
            return False
        return all(f[a] < f[b] for a in range(self.n) for b in self.above[a])
