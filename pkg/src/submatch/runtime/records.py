"""Intermediate match records.

A row is a tuple aligned to a list of query vertices. A concrete entry is an
``int``; a compressed entry is a sorted ``tuple`` of candidate data vertices
that has not been expanded yet.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from ..constraints import MatchConstraints

Row = tuple


@dataclass
class Relation:
    """``packed`` lists the vertices whose entries may be candidate arrays."""

    vars: tuple[int, ...]
    rows: list[Row] = field(default_factory=list)
    packed: frozenset[int] = frozenset()

    def __len__(self) -> int:
        return len(self.rows)


def is_compressed(row: Row) -> bool:
    return any(type(x) is tuple for x in row)


def row_width(row: Row) -> int:
    return sum(len(x) if type(x) is tuple else 1 for x in row)


class Expander:
    """Decompresses rows aligned to ``vars``; order checks are resolved to
    row positions once per pattern of compressed columns."""

    def __init__(self, vars: Sequence[int], constraints: Optional[MatchConstraints] = None):
        self.vars = tuple(vars)
        pos = {v: i for i, v in enumerate(self.vars)}
        # (i, j) means row[i] < row[j]
        pairs = []
        if constraints is not None:
            for v in self.vars:
                for x in constraints.above[v]:
                    if x in pos:
                        pairs.append((pos[v], pos[x]))
        self.pairs = tuple(pairs)
        self._plans: dict[tuple[int, ...], tuple] = {}

    def _plan(self, open_pos: tuple[int, ...]):
        got = self._plans.get(open_pos)
        if got is None:
            opened = set(open_pos)
            fixed = tuple((i, j) for i, j in self.pairs if i not in opened and j not in opened)
            steps = []
            for k, i in enumerate(open_pos):
                # bounds from concrete columns and earlier opened columns
                known = opened - set(open_pos[k:])
                lo = tuple(a for a, b in self.pairs if b == i and (a not in opened or a in known))
                hi = tuple(b for a, b in self.pairs if a == i and (b not in opened or b in known))
                steps.append((i, lo, hi))
            got = self._plans[open_pos] = (fixed, tuple(steps))
        return got

    def __call__(self, row: Row) -> Iterator[Row]:
        concrete = [x for x in row if type(x) is not tuple]
        if len(set(concrete)) != len(concrete):
            return
        open_pos = tuple(i for i, x in enumerate(row) if type(x) is tuple)
        fixed, steps = self._plan(open_pos)
        for i, j in fixed:
            if not row[i] < row[j]:
                return
        if not steps:
            yield tuple(row)
            return
        used = set(concrete)
        out = list(row)
        last = len(steps) - 1

        def go(k: int) -> Iterator[Row]:
            i, lo, hi = steps[k]
            low = max((out[a] for a in lo), default=-1)
            high = min((out[b] for b in hi), default=None)
            for c in row[i]:
                if c <= low or c in used or (high is not None and c >= high):
                    continue
                out[i] = c
                if k == last:
                    yield tuple(out)
                    continue
                used.add(c)
                yield from go(k + 1)
                used.discard(c)

        yield from go(0)


def decompress(row: Row, vars: Sequence[int], constraints: Optional[MatchConstraints] = None) -> Iterator[Row]:
    """Expand candidate arrays, keeping injective assignments that satisfy the
    order constraints among the vertices in ``vars``."""
    return Expander(vars, constraints)(row)


def expansion_count(row: Row, vars: Sequence[int], constraints: Optional[MatchConstraints] = None) -> int:
    if not is_compressed(row):
        return 1
    return sum(1 for _ in decompress(row, vars, constraints))


def to_query_order(row: Row, vars: Sequence[int], n: int) -> tuple[int, ...]:
    """Reorder a concrete row so position ``v`` holds ``f(v)``."""
    out = [0] * n
    for v, x in zip(vars, row):
        out[v] = x
    return tuple(out)


def materialize(rel: Relation, n: int, constraints: Optional[MatchConstraints] = None) -> list[tuple[int, ...]]:
    out = []
    expand = Expander(rel.vars, constraints)
    for row in rel.rows:
        for flat in expand(row):
            out.append(to_query_order(flat, rel.vars, n))
    return out
