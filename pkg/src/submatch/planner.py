"""Execution planning: join plans, matching orders and hypercube shares."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .graph import DataGraph, GraphStats, stats as graph_stats
from .query import (
    JoinUnit,
    PartialOrder,
    QueryGraph,
    cliques,
    count_linear_extensions,
    min_connected_vertex_cover,
)


# ---------------------------------------------------------------- cost model

@dataclass(frozen=True)
class CostModel:
    """Match-count estimator.

    ``er`` treats the data graph as G(N, p) with ``p = M / C(N, 2)``.
    ``degree_stats`` refines stars with the observed degree sequence.
    """

    mode: str = "er"
    num_vertices: int = 0
    num_edges: int = 0
    degrees: tuple[int, ...] = ()
    label_frequencies: tuple[tuple[int, int], ...] = ()

    @classmethod
    def from_graph(cls, g: DataGraph, mode: str = "er") -> "CostModel":
        st = graph_stats(g)
        degs = tuple(int(d) for d in (g.offsets[1:] - g.offsets[:-1]).tolist()) if mode == "degree_stats" else ()
        return cls(mode, st.num_vertices, st.num_edges, degs, tuple(sorted(st.label_frequencies.items())))

    @classmethod
    def from_stats(cls, st: GraphStats) -> "CostModel":
        return cls("er", st.num_vertices, st.num_edges, (), tuple(sorted(st.label_frequencies.items())))

    @property
    def edge_probability(self) -> float:
        n = self.num_vertices
        return self.num_edges / (n * (n - 1) / 2) if n > 1 else 0.0

    def label_fraction(self, label: Optional[int]) -> float:
        if label is None or not self.num_vertices:
            return 1.0
        return dict(self.label_frequencies).get(label, 0) / self.num_vertices


def _falling(n: int, k: int) -> float:
    out = 1.0
    for i in range(k):
        out *= max(n - i, 0)
    return out


def estimate_cardinality(
    vertices: Iterable[int],
    edges: Iterable[tuple[int, int]],
    model: CostModel,
    order: Optional[PartialOrder] = None,
    labels: Optional[Sequence[Optional[int]]] = None,
) -> float:
    """Expected number of matches of the pattern ``(vertices, edges)``.

    Counts injective maps, ``N (N-1) ... (N-k+1) p^e``, times the fraction of
    vertex orderings compatible with ``order`` restricted to the pattern.
    """
    vs = sorted(set(vertices))
    es = list(edges)
    k = len(vs)
    if k == 0:
        return 1.0
    order_factor = 1.0
    if order is not None and len(order):
        order_factor = count_linear_extensions(vs, order) / math.factorial(k)

    root = _star_root(vs, es)
    if model.mode == "degree_stats" and root is not None and model.degrees:
        base = sum(_falling(d, k - 1) for d in model.degrees)
    else:
        base = _falling(model.num_vertices, k) * model.edge_probability ** len(es)
    if labels is not None:
        for v in vs:
            base *= model.label_fraction(labels[v])
    return base * order_factor


def _star_root(vs: Sequence[int], es: Sequence[tuple[int, int]]) -> Optional[int]:
    if len(es) != len(vs) - 1 or not es:
        return None
    for v in vs:
        if all(v in e for e in es):
            return v
    return None


# ---------------------------------------------------------------- BinJoin plans

@dataclass(frozen=True)
class PlanNode:
    vertices: frozenset[int]
    edges: frozenset[tuple[int, int]]
    estimate: float
    cost: float
    unit: Optional[JoinUnit] = None
    left: Optional["PlanNode"] = None
    right: Optional["PlanNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.unit is not None

    @property
    def key(self) -> frozenset[int]:
        if self.is_leaf:
            return frozenset()
        return self.left.vertices & self.right.vertices

    def leaves(self) -> list["PlanNode"]:
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def postorder(self) -> list["PlanNode"]:
        if self.is_leaf:
            return [self]
        return self.left.postorder() + self.right.postorder() + [self]

    def num_joins(self) -> int:
        return 0 if self.is_leaf else 1 + self.left.num_joins() + self.right.num_joins()


def leaf(unit: JoinUnit, estimate: float = 0.0) -> PlanNode:
    return PlanNode(unit.vertices, unit.edge_set(), estimate, estimate, unit)


def join(left: PlanNode, right: PlanNode, estimate: float = 0.0) -> PlanNode:
    if not left.vertices & right.vertices:
        raise ValueError("join sides share no vertex")
    return PlanNode(
        left.vertices | right.vertices, left.edges | right.edges, estimate,
        left.cost + right.cost + estimate, None, left, right,
    )


@dataclass(frozen=True)
class BinJoinPlan:
    root: PlanNode
    batching_vertex: Optional[int] = None
    compressed: dict[JoinUnit, frozenset[int]] = field(default_factory=dict)

    @property
    def cost(self) -> float:
        return self.root.cost

    def units(self) -> list[JoinUnit]:
        return [n.unit for n in self.root.leaves()]

    def key_vertices(self) -> frozenset[int]:
        out: set[int] = set()
        for n in self.root.postorder():
            out |= n.key
        return frozenset(out)

    def describe(self) -> str:
        lines = [f"BinJoin plan (cost {self.cost:.4g}, batching on "
                 f"{'-' if self.batching_vertex is None else 'v%d' % self.batching_vertex})"]

        def walk(node: PlanNode, depth: int) -> None:
            pad = "  " * depth
            if node.is_leaf:
                comp = self.compressed.get(node.unit, frozenset())
                extra = f"  compress {{{','.join('v%d' % v for v in sorted(comp))}}}" if comp else ""
                lines.append(f"{pad}{node.unit}  est={node.estimate:.4g}{extra}")
            else:
                key = ",".join(f"v{v}" for v in sorted(node.key))
                lines.append(f"{pad}Join on {{{key}}}  est={node.estimate:.4g}")
                walk(node.left, depth + 1)
                walk(node.right, depth + 1)

        walk(self.root, 1)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        def enc(node: PlanNode) -> dict:
            if node.is_leaf:
                u = node.unit
                return {"unit": u.kind, "vertices": sorted(u.vertices), "root": u.root, "estimate": node.estimate}
            return {"left": enc(node.left), "right": enc(node.right), "estimate": node.estimate}

        return {
            "kind": "binjoin",
            "tree": enc(self.root),
            "batching_vertex": self.batching_vertex,
            "compressed": [
                {"unit": u.kind, "vertices": sorted(u.vertices), "root": u.root, "compress": sorted(c)}
                for u, c in self.compressed.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BinJoinPlan":
        def unit_of(d: dict) -> JoinUnit:
            if d["unit"] == "star":
                return JoinUnit.star(d["root"], set(d["vertices"]) - {d["root"]})
            return JoinUnit.clique(d["vertices"])

        def dec(d: dict) -> PlanNode:
            if "unit" in d:
                return leaf(unit_of(d), d.get("estimate", 0.0))
            return join(dec(d["left"]), dec(d["right"]), d.get("estimate", 0.0))

        comp = {unit_of(c): frozenset(c["compress"]) for c in data.get("compressed", [])}
        return cls(dec(data["tree"]), data.get("batching_vertex"), comp)


def candidate_units(q: QueryGraph, triangle_indexed: bool, star_limit: Optional[int] = None) -> list[JoinUnit]:
    """Every sub-star (optionally capped at ``star_limit`` leaves) plus cliques when indexed."""
    seen: dict[frozenset, JoinUnit] = {}
    for r in range(q.n):
        nbrs = sorted(q.adj[r])
        top = len(nbrs) if star_limit is None else min(star_limit, len(nbrs))
        for k in range(1, top + 1):
            for leaves in itertools.combinations(nbrs, k):
                u = JoinUnit.star(r, leaves)
                seen.setdefault(u.edge_set(), u)
    if triangle_indexed:
        for c in cliques(q):
            u = JoinUnit.clique(c)
            seen[u.edge_set()] = u
    return list(seen.values())


def optimal_binjoin_plan(
    q: QueryGraph,
    model: CostModel,
    triangle_indexed: bool = False,
    star_limit: Optional[int] = None,
    order: Optional[PartialOrder] = None,
    units: Optional[Sequence[JoinUnit]] = None,
) -> PlanNode:
    """Bushy DP over connected edge subsets of ``q``.

    ``best(S)`` is the cheapest of: ``S`` as a single unit, or
    ``best(S_l) + best(S_r) + est(S)`` over splits with ``S_l | S_r = S``.
    With clique units the two sides may share edges between join-key vertices
    (overlapped decomposition).
    """
    edges = q.sorted_edges()
    m = len(edges)
    full = (1 << m) - 1
    labels = q.labels if q.labelled else None
    if units is None:
        units = candidate_units(q, triangle_indexed, star_limit)
    overlap = any(u.kind == "clique" for u in units)

    vmask_cache: dict[int, frozenset[int]] = {}

    def verts(mask: int) -> frozenset[int]:
        got = vmask_cache.get(mask)
        if got is None:
            vs: set[int] = set()
            for i in range(m):
                if mask >> i & 1:
                    vs.update(edges[i])
            got = vmask_cache[mask] = frozenset(vs)
        return got

    def emask(es: Iterable[tuple[int, int]]) -> int:
        return sum(1 << edges.index(e) for e in es)

    induced_cache: dict[frozenset[int], int] = {}

    def induced_mask(vs: frozenset[int]) -> int:
        got = induced_cache.get(vs)
        if got is None:
            got = induced_cache[vs] = sum(1 << i for i, (a, b) in enumerate(edges) if a in vs and b in vs)
        return got

    def connected(mask: int) -> bool:
        vs = verts(mask)
        start = next(iter(vs))
        seen = {start}
        changed = True
        while changed:
            changed = False
            for i in range(m):
                if mask >> i & 1:
                    a, b = edges[i]
                    if (a in seen) != (b in seen):
                        seen.update((a, b))
                        changed = True
        return seen == vs

    def est(mask: int) -> float:
        es = [edges[i] for i in range(m) if mask >> i & 1]
        return estimate_cardinality(verts(mask), es, model, order, labels)

    unit_of = {emask(u.edge_set()): u for u in units}
    best: dict[int, PlanNode] = {}
    for mask in sorted(range(1, full + 1), key=lambda x: (bin(x).count("1"), x)):
        if not connected(mask):
            continue
        e = est(mask)
        cand: Optional[PlanNode] = None
        if mask in unit_of:
            cand = PlanNode(verts(mask), frozenset(edges[i] for i in range(m) if mask >> i & 1), e, e, unit_of[mask])
        low = mask & -mask
        sub = (mask - 1) & mask
        while sub:
            left = best.get(sub)
            rest = mask & ~sub
            # without overlap each split is met twice; keep the one holding the lowest edge
            if left is not None and rest and (overlap or sub & low):
                extra_space = sub & induced_mask(verts(rest)) if overlap else 0
                t = extra_space
                while True:
                    other = rest | t
                    right = best.get(other)
                    if right is not None and other != mask:
                        cost = left.cost + right.cost + e
                        if cand is None or cost < cand.cost - 1e-9:
                            cand = PlanNode(left.vertices | right.vertices, left.edges | right.edges, e, cost, None, left, right)
                    if t == 0:
                        break
                    t = (t - 1) & extra_space
            sub = (sub - 1) & mask
        if cand is not None:
            best[mask] = cand
    if full not in best:
        raise ValueError("no covering decomposition from the given units")
    return best[full]


def select_batching_vertex(root: PlanNode) -> tuple[Optional[int], bool]:
    """Join-key vertex present in the most units (ties: smaller id).

    Returns ``(vertex, in_every_unit)``; units lacking the vertex must be
    recomputed in every batch. A single-unit plan batches on its star root
    (or smallest clique vertex).
    """
    leaves = root.leaves()
    if root.is_leaf:
        u = root.unit
        return (u.root if u.kind == "star" else min(u.vertices)), True
    keys: set[int] = set()
    for n in root.postorder():
        keys |= n.key
    if not keys:
        return None, False
    best = max(sorted(keys), key=lambda v: sum(v in l.vertices for l in leaves))
    return best, all(best in l.vertices for l in leaves)


def binjoin_compression(root: PlanNode, batching_vertex: Optional[int] = None) -> dict[JoinUnit, frozenset[int]]:
    """Vertices kept as candidate arrays, per unit.

    Stars: every non-key leaf. Cliques: one non-key vertex (the largest id).
    Key vertices are those shared by two or more units.
    """
    leaves = root.leaves()
    every = set().union(*(l.vertices for l in leaves))
    shared = {v for v in every if sum(v in l.vertices for l in leaves) > 1}
    if batching_vertex is not None:
        shared.add(batching_vertex)
    out: dict[JoinUnit, frozenset[int]] = {}
    for l in leaves:
        u = l.unit
        if u.kind == "star":
            c = frozenset(x for x in u.leaves if x not in shared)
        else:
            free = sorted(x for x in u.vertices if x not in shared)
            c = frozenset(free[-1:])
        if c:
            out[u] = c
    return out


def plan_binjoin(
    q: QueryGraph,
    model: CostModel,
    triangle_indexed: bool = False,
    compression: bool = False,
    batching: bool = False,
    star_limit: Optional[int] = None,
    order: Optional[PartialOrder] = None,
) -> BinJoinPlan:
    root = optimal_binjoin_plan(q, model, triangle_indexed, star_limit, order)
    bv = select_batching_vertex(root)[0] if batching else None
    comp = binjoin_compression(root, bv) if compression else {}
    return BinJoinPlan(root, bv, comp)


def enumerate_plans(
    q: QueryGraph, model: CostModel, units: Sequence[JoinUnit], order: Optional[PartialOrder] = None, overlap: bool = False
) -> list[PlanNode]:
    """Every bushy plan over ``units`` (exhaustive; small queries only)."""
    labels = q.labels if q.labelled else None
    memo: dict[frozenset, list[PlanNode]] = {}

    def est(es: frozenset) -> float:
        vs = {x for e in es for x in e}
        return estimate_cardinality(vs, es, model, order, labels)

    unit_by_edges = {u.edge_set(): u for u in units}

    def plans(es: frozenset) -> list[PlanNode]:
        if es in memo:
            return memo[es]
        out: list[PlanNode] = []
        e = est(es)
        if es in unit_by_edges:
            out.append(PlanNode(frozenset(x for ed in es for x in ed), es, e, e, unit_by_edges[es]))
        items = sorted(es)
        for r in range(1, len(items)):
            for left_edges in itertools.combinations(items, r):
                ls = frozenset(left_edges)
                rest = es - ls
                lv = {x for ed in ls for x in ed}
                rv = {x for ed in rest for x in ed}
                if not lv & rv:
                    continue
                extras = [ed for ed in ls if ed[0] in rv and ed[1] in rv] if overlap else []
                for k in range(len(extras) + 1):
                    for t in itertools.combinations(extras, k):
                        rs = rest | frozenset(t)
                        if rs == es:
                            continue
                        for lp in plans(ls):
                            for rp in plans(rs):
                                out.append(PlanNode(lp.vertices | rp.vertices, es, e, lp.cost + rp.cost + e, None, lp, rp))
        memo[es] = out
        return out

    return plans(frozenset(q.edges))


# ---------------------------------------------------------------- WOptJoin orders

@dataclass(frozen=True)
class WOptOrder:
    vertices: tuple[int, ...]
    compressed: tuple[bool, ...]
    groups: tuple[tuple[tuple[int, tuple[int, ...]], ...], ...]
    kind: str = "greedy"

    @property
    def batching_vertex(self) -> int:
        return self.vertices[0]

    def sources(self, level: int) -> tuple[int, ...]:
        """Earlier vertices adjacent (in the query) to ``vertices[level]``."""
        return tuple(a for a, members in self.groups[level] for a in (a, *members))

    def describe(self) -> str:
        lines = [f"WOptJoin order ({self.kind}), batching on v{self.vertices[0]}"]
        for i, v in enumerate(self.vertices):
            grp = "; ".join(
                "{" + ",".join(f"v{x}" for x in (a, *mem)) + "}" for a, mem in self.groups[i]
            )
            flag = "  [compressed]" if self.compressed[i] else ""
            lines.append(f"  {i + 1}. v{v}" + (f"  intersect {grp}" if grp else "") + flag)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "kind": "woptjoin",
            "order_kind": self.kind,
            "vertices": list(self.vertices),
            "compressed": list(self.compressed),
            "groups": [[[a, list(m)] for a, m in lvl] for lvl in self.groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WOptOrder":
        return cls(
            tuple(d["vertices"]),
            tuple(d["compressed"]),
            tuple(tuple((a, tuple(m)) for a, m in lvl) for lvl in d["groups"]),
            d.get("order_kind", "greedy"),
        )


def _greedy_sequence(q: QueryGraph, region: Sequence[int], selected: Sequence[int], label_freq=None) -> list[int]:
    chosen = list(selected)
    remaining = set(region)
    out = []

    def freq(v: int) -> int:
        if label_freq is None or q.labels is None or q.labels[v] is None:
            return 0
        return label_freq.get(q.labels[v], 0)

    while remaining:
        if not chosen:
            pick = min(remaining, key=lambda v: (-q.degree(v), freq(v), v))
        else:
            pick = min(remaining, key=lambda v: (-len(q.adj[v] & set(chosen)), freq(v), v))
        chosen.append(pick)
        out.append(pick)
        remaining.discard(pick)
    return out


def greedy_matching_order(q: QueryGraph, label_freq: Optional[dict[int, int]] = None) -> tuple[int, ...]:
    """Largest degree first, then most connections to the selected vertices
    (ties: rarer label, then smaller id)."""
    return tuple(_greedy_sequence(q, range(q.n), [], label_freq))


def crystal_matching_order(q: QueryGraph, label_freq: Optional[dict[int, int]] = None) -> tuple[int, ...]:
    """Cover vertices first, greedy inside and outside the cover."""
    cover = sorted(min_connected_vertex_cover(q))
    head = _greedy_sequence(q, cover, [], label_freq)
    tail = _greedy_sequence(q, [v for v in range(q.n) if v not in cover], head, label_freq)
    return tuple(head + tail)


def compression_flags(q: QueryGraph, vertices: Sequence[int]) -> tuple[bool, ...]:
    """``v_i`` compressible iff no later vertex is its query neighbor."""
    pos = {v: i for i, v in enumerate(vertices)}
    return tuple(all(pos[x] < i for x in q.adj[v]) for i, v in enumerate(vertices))


def trindexing_groups(
    q: QueryGraph,
    vertices: Sequence[int],
    level: int,
    ordered_with: Optional[PartialOrder] = None,
) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """Greedy grouping of one level's intersection sources.

    Each group ``U(v_x) = {v_x} + {v_y : (v_x, v_y) in E_Q}`` can be intersected
    at ``f(v_x)``'s worker. The largest group is formed first (ties: smaller
    anchor id). For the space-efficient triangle partition pass the symmetry
    order: ``v_y`` joins only if ``f(v_x) < f(v_y)`` and ``f(v_x) < f(new)`` are
    implied, since only edges above the owned vertex are stored.
    """
    new = vertices[level]
    remaining = [v for v in vertices[:level] if v in q.adj[new]]
    closure = ordered_with.closure() if ordered_with is not None else None
    groups = []
    rem = set(remaining)
    while rem:
        def members(x: int) -> set[int]:
            if closure is not None and (x, new) not in closure:
                return set()
            out = q.adj[x] & rem
            if closure is not None:
                out = {y for y in out if (x, y) in closure}
            return out

        x = min(rem, key=lambda v: (-len(members(v)), v))
        mem = members(x)
        groups.append((x, tuple(sorted(mem))))
        rem -= mem | {x}
    return tuple(groups)


def build_woptjoin_order(
    q: QueryGraph,
    vertices: Sequence[int],
    kind: str = "greedy",
    trindexing: bool = False,
    compression: bool = False,
    ordered_partition: Optional[PartialOrder] = None,
) -> WOptOrder:
    vertices = tuple(vertices)
    for i in range(1, len(vertices)):
        if not q.adj[vertices[i]] & set(vertices[:i]):
            raise ValueError(f"order {vertices} is not prefix-connected at position {i}")
    if trindexing:
        groups = tuple(trindexing_groups(q, vertices, i, ordered_partition) for i in range(len(vertices)))
    else:
        groups = tuple(
            tuple((v, ()) for v in vertices[:i] if v in q.adj[vertices[i]]) for i in range(len(vertices))
        )
    flags = compression_flags(q, vertices) if compression else (False,) * len(vertices)
    return WOptOrder(vertices, flags, groups, kind)


def choose_matching_order(q: QueryGraph, mode: str = "auto", label_freq=None) -> tuple[tuple[int, ...], str]:
    """``auto`` takes the crystal order only if it compresses strictly more vertices."""
    greedy = greedy_matching_order(q, label_freq)
    if mode == "greedy":
        return greedy, "greedy"
    crystal = crystal_matching_order(q, label_freq)
    if mode == "crystal":
        return crystal, "crystal"
    if sum(compression_flags(q, crystal)) > sum(compression_flags(q, greedy)):
        return crystal, "crystal"
    return greedy, "greedy"


# ---------------------------------------------------------------- hypercube shares

@dataclass(frozen=True)
class HypercubeShares:
    buckets: tuple[int, ...]

    @property
    def num_cells(self) -> int:
        return math.prod(self.buckets)

    def worker_of(self, coords: Sequence[int]) -> int:
        wid = 0
        for c, b in zip(coords, self.buckets):
            wid = wid * b + c
        return wid

    def coords_of(self, worker: int) -> tuple[int, ...]:
        out = []
        for b in reversed(self.buckets):
            out.append(worker % b)
            worker //= b
        return tuple(reversed(out))

    def coordinate(self, dim: int, u: int) -> int:
        return u % self.buckets[dim]


def _bucket_vectors(n: int, w: int) -> Iterable[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for b in range(1, w + 1):
        for rest in _bucket_vectors(n - 1, w // b):
            yield (b, *rest)


def edge_load(q: QueryGraph, buckets: Sequence[int]) -> float:
    """Expected per-worker share of each data edge copy, summed over query edges."""
    return sum(1.0 / (buckets[a] * buckets[b]) for a, b in q.edges)


def hypercube_shares(q: QueryGraph, w: int, model: Optional[CostModel] = None) -> HypercubeShares:
    """Enumerate integer bucket vectors with product <= w, keep the largest
    product, then the smallest per-worker edge load, then the
    lexicographically smallest vector."""
    if w < 1:
        raise ValueError("w must be >= 1")
    best_key = None
    best: tuple[int, ...] = (1,) * q.n
    for vec in _bucket_vectors(q.n, w):
        key = (-math.prod(vec), edge_load(q, vec), vec)
        if best_key is None or key < best_key:
            best_key, best = key, vec
    return HypercubeShares(best)
