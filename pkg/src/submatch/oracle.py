"""Brute-force reference enumeration.

Deliberately naive and self-contained: it backtracks in query-id order over
every data vertex and checks edges against a set of data edges. It shares no
code with the strategies it is used to check.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .graph import DataGraph
from .query import PartialOrder, QueryGraph, symmetry_break_order

SEARCH_GUARD = 10**9


class OracleRefused(RuntimeError):
    """The estimated search is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class OracleResult:
    matches: tuple[tuple[int, ...], ...]

    @property
    def count(self) -> int:
        return len(self.matches)


def estimated_search_nodes(q: QueryGraph, g: DataGraph) -> int:
    n_data = g.num_vertices
    max_deg = max((g.degree(u) for u in range(n_data)), default=0)
    prefix_connected = all(any(q.has_edge(v, x) for x in range(v)) for v in range(1, q.n))
    if prefix_connected:
        return n_data * max(max_deg, 1) ** (q.n - 1)
    return n_data ** q.n


def brute_force(
    q: QueryGraph,
    g: DataGraph,
    use_order: bool = True,
    use_labels: bool = True,
    order: Optional[PartialOrder] = None,
) -> OracleResult:
    """All injective maps respecting query edges, labels and order pairs.

    ``order`` overrides the symmetry-breaking order of ``q``.
    """
    if estimated_search_nodes(q, g) > SEARCH_GUARD:
        raise OracleRefused("search space exceeds guard")
    n = q.n
    data_edges = set()
    nbr: list[list[int]] = [[] for _ in range(g.num_vertices)]
    for u in range(g.num_vertices):
        for x in g.neighbors(u).tolist():
            data_edges.add((u, x))
            nbr[u].append(x)
    everything = range(g.num_vertices)
    qedges = list(q.edges)
    back_edges: list[list[int]] = [[] for _ in range(n)]
    for a, b in qedges:
        back_edges[max(a, b)].append(min(a, b))

    pairs: list[tuple[int, int]] = []
    if order is not None:
        pairs = list(order.pairs)
    elif use_order and not (use_labels and q.labelled):
        pairs = list(symmetry_break_order(q).pairs)
    back_less = [[a for a, b in pairs if b == v and a < v] for v in range(n)]
    back_more = [[b for a, b in pairs if a == v and b < v] for v in range(n)]

    qlab = q.labels if (use_labels and q.labels is not None) else None
    dlab = g.labels.tolist() if g.labels is not None else None

    out: list[tuple[int, ...]] = []
    f = [0] * n

    def go(v: int) -> None:
        if v == n:
            out.append(tuple(f))
            return
        # any back edge pins u to a neighbor of an already-mapped vertex
        pool = nbr[f[back_edges[v][0]]] if back_edges[v] else everything
        for u in pool:
            if u in f[:v]:
                continue
            if qlab is not None and qlab[v] is not None and (dlab is None or dlab[u] != qlab[v]):
                continue
            if any((f[a], u) not in data_edges for a in back_edges[v]):
                continue
            if any(not f[a] < u for a in back_less[v]) or any(not u < f[b] for b in back_more[v]):
                continue
            f[v] = u
            go(v + 1)

    go(0)
    return OracleResult(tuple(sorted(out)))


@dataclass
class DiffReport:
    missing: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    extra: list[tuple[tuple[int, ...], int]] = field(default_factory=list)
    total_discrepancies: int = 0

    @property
    def ok(self) -> bool:
        return self.total_discrepancies == 0

    def __len__(self) -> int:
        return self.total_discrepancies

    def lines(self) -> list[str]:
        out = [f"missing {m} (x{c})" for m, c in self.missing]
        out += [f"unexpected {m} (x{c})" for m, c in self.extra]
        return out


def compare(oracle: OracleResult, strategy_output: Sequence[tuple[int, ...]], limit: int = 10) -> DiffReport:
    """Multiset difference; lists at most ``limit`` discrepancies.

    A duplicated tuple shows up as ``unexpected`` with its surplus multiplicity.
    """
    got_sorted = sorted(tuple(t) for t in strategy_output)
    if len(got_sorted) == len(oracle.matches) and got_sorted == list(oracle.matches):
        return DiffReport()
    want = Counter(oracle.matches)
    got = Counter(got_sorted)
    report = DiffReport()
    for t in sorted(set(want) | set(got)):
        d = got[t] - want[t]
        if d == 0:
            continue
        report.total_discrepancies += abs(d)
        entry = (t, abs(d))
        target = report.extra if d > 0 else report.missing
        if len(report.missing) + len(report.extra) < limit:
            target.append(entry)
    return report
