"""Single-worker cover-and-extend matcher used by ShrCube and FullRep.

The minimum connected vertex cover is matched first by backtracking with
neighbor-set intersection; every remaining (bud) vertex only touches cover
vertices, so its candidates are one intersection per crystal, after which the
buds are assigned injectively.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .constraints import MatchConstraints
from .graph import DataGraph
from .planner import crystal_matching_order
from .query import QueryGraph, core_crystal_decompose

VertexFilter = Callable[[int, int], bool]


class GraphView:
    """Read-only adjacency view of a whole :class:`DataGraph`."""

    def __init__(self, g: DataGraph):
        self._lists = g.adj_lists
        self._sets = g.adj_sets
        self.labels = g.label_list

    def vertices(self) -> Iterable[int]:
        return range(len(self._lists))

    def neighbors(self, u: int) -> Sequence[int]:
        return self._lists[u]

    def neighbor_set(self, u: int) -> frozenset[int]:
        return self._sets[u]


@dataclass
class LocalGraph:
    """Adjacency assembled from received edges."""

    adj: dict[int, set[int]] = field(default_factory=dict)
    labels: Optional[Sequence[int]] = None

    def add_edge(self, u: int, v: int) -> None:
        if u != v:
            self.adj.setdefault(u, set()).add(v)
            self.adj.setdefault(v, set()).add(u)

    def freeze(self) -> "LocalGraph":
        self._lists = {u: tuple(sorted(s)) for u, s in self.adj.items()}
        self._sets = {u: frozenset(s) for u, s in self.adj.items()}
        return self

    @property
    def num_edges(self) -> int:
        return sum(len(s) for s in self.adj.values()) // 2

    def vertices(self) -> Iterable[int]:
        return sorted(self.adj)

    def neighbors(self, u: int) -> Sequence[int]:
        return self._lists.get(u, ())

    def neighbor_set(self, u: int) -> frozenset[int]:
        return self._sets.get(u, frozenset())


def local_order(q: QueryGraph) -> tuple[int, ...]:
    return crystal_matching_order(q)


def local_match(
    q: QueryGraph,
    view,
    constraints: Optional[MatchConstraints] = None,
    vertex_filter: Optional[VertexFilter] = None,
    tick: Optional[Callable[[], None]] = None,
    count_only: bool = False,
):
    """All matches (tuples indexed by query vertex), or their number."""
    order = local_order(q)
    cc = core_crystal_decompose(q)
    ncore = len(cc.core)
    labels = view.labels
    n = q.n
    pos = {v: i for i, v in enumerate(order)}
    back = [[x for x in q.adj[v] if pos[x] < pos[v]] for v in order]
    crystal_of = {b: c for c in cc.crystals for b in c.buds}
    f = [-1] * n
    assigned: dict[int, int] = {}
    used: set[int] = set()
    out: list[tuple[int, ...]] = []
    total = 0
    bud_cache: dict = {}

    def ok(v: int, u: int) -> bool:
        if u in used:
            return False
        if vertex_filter is not None and not vertex_filter(v, u):
            return False
        if constraints is not None:
            if not constraints.label_ok(v, u, labels):
                return False
            if not constraints.order_ok(v, u, assigned):
                return False
        return True

    def candidates(i: int) -> Iterable[int]:
        v = order[i]
        srcs = back[i]
        if not srcs:
            return view.vertices()
        if i >= ncore:
            key = crystal_of[v].clique_vertices
            got = bud_cache.get(key)
            if got is None:
                got = bud_cache[key] = _intersect(view, [f[x] for x in srcs])
            return got
        return _intersect(view, [f[x] for x in srcs])

    def go(i: int) -> None:
        nonlocal total
        if i == n:
            if count_only:
                total += 1
            else:
                out.append(tuple(f))
            return
        if i == ncore:
            bud_cache.clear()
        v = order[i]
        for u in candidates(i):
            if tick is not None:
                tick()
            if not ok(v, u):
                continue
            f[v] = u
            assigned[v] = u
            used.add(u)
            go(i + 1)
            used.discard(u)
            del assigned[v]
        f[v] = -1

    go(0)
    return total if count_only else out


def _intersect(view, anchors: Sequence[int]) -> list[int]:
    lists = sorted((view.neighbors(a) for a in anchors), key=len)
    base = lists[0]
    if len(lists) == 1:
        return list(base)
    sets = [view.neighbor_set(a) for a in anchors]
    return [c for c in base if all(c in s for s in sets)]
