"""Query graphs, automorphisms, symmetry breaking and decompositions."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from typing import Iterable, Optional, Sequence

MAX_QUERY_VERTICES = 16


class QueryFormatError(ValueError):
    pass


@dataclass(frozen=True)
class QueryGraph:
    n: int
    edges: frozenset[tuple[int, int]]
    labels: Optional[tuple[Optional[int], ...]] = None
    name: str = ""

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUERY_VERTICES:
            raise QueryFormatError(f"query must have 1..{MAX_QUERY_VERTICES} vertices")
        norm = set()
        for a, b in self.edges:
            if a == b or not (0 <= a < self.n and 0 <= b < self.n):
                raise QueryFormatError(f"bad query edge ({a},{b})")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(norm))
        if self.labels is not None and len(self.labels) != self.n:
            raise QueryFormatError("labels length must equal n")
        if not self.is_connected:
            raise QueryFormatError("query graph must be connected")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], labels=None, name: str = "") -> "QueryGraph":
        return cls(n, frozenset(edges), None if labels is None else tuple(labels), name)

    @cached_property
    def adj(self) -> tuple[frozenset[int], ...]:
        nb: list[set[int]] = [set() for _ in range(self.n)]
        for a, b in self.edges:
            nb[a].add(b)
            nb[b].add(a)
        return tuple(frozenset(s) for s in nb)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def labelled(self) -> bool:
        return self.labels is not None and any(l is not None for l in self.labels)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adj[a]

    @cached_property
    def is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for x in self.adj[v]:
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
        return len(seen) == self.n

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def induced(self, vertices: Iterable[int]) -> list[tuple[int, int]]:
        vs = set(vertices)
        return [e for e in self.sorted_edges() if e[0] in vs and e[1] in vs]

    def to_text(self) -> str:
        lines = [str(self.n)] + [f"{a} {b}" for a, b in self.sorted_edges()]
        if self.labels is not None:
            lines += [f"l {v} {lab}" for v, lab in enumerate(self.labels) if lab is not None]
        return "\n".join(lines) + "\n"


def parse_query(text: str, name: str = "") -> QueryGraph:
    """Header line ``n``, edge lines ``i j`` (0-based), label lines ``l i L``."""
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or len(lines[0]) != 1:
        raise QueryFormatError("first line must be the vertex count")
    try:
        n = int(lines[0][0])
        edges = []
        labels: list[Optional[int]] = [None] * n
        any_label = False
        for parts in lines[1:]:
            if parts[0] in ("l", "label") and len(parts) == 3:
                labels[int(parts[1])] = int(parts[2])
                any_label = True
            elif len(parts) == 2:
                edges.append((int(parts[0]), int(parts[1])))
            else:
                raise QueryFormatError(f"unrecognised query line {' '.join(parts)!r}")
    except (ValueError, IndexError) as exc:
        raise QueryFormatError(f"malformed query: {exc}") from None
    return QueryGraph.from_edges(n, edges, labels if any_label else None, name)


def subquery(
    q: QueryGraph, vertices: Sequence[int], edges: Optional[Iterable[tuple[int, int]]] = None
) -> QueryGraph:
    """Query on ``vertices`` (renumbered by position) with the given edges,
    defaulting to the induced ones."""
    pos = {v: i for i, v in enumerate(vertices)}
    chosen = q.induced(vertices) if edges is None else list(edges)
    labels = None if q.labels is None else [q.labels[v] for v in vertices]
    return QueryGraph.from_edges(len(vertices), [(pos[a], pos[b]) for a, b in chosen], labels)


CORPUS_NAMES = (
    "triangle", "square", "diamond", "clique4", "house",
    "chordal_house", "path5", "clique5", "double_square",
)


def corpus_query(name: str) -> QueryGraph:
    text = resources.files("submatch.queries").joinpath(f"{name}.txt").read_text()
    return parse_query(text, name)


def corpus() -> dict[str, QueryGraph]:
    return {name: corpus_query(name) for name in CORPUS_NAMES}


# ---------------------------------------------------------------- automorphisms

def automorphisms(q: QueryGraph) -> list[tuple[int, ...]]:
    """All label-preserving automorphisms, ``perm[v]`` is the image of ``v``."""
    n = q.n
    labels = q.labels or (None,) * n
    out: list[tuple[int, ...]] = []
    image = [-1] * n
    used = [False] * n

    def extend(v: int) -> None:
        if v == n:
            out.append(tuple(image))
            return
        for c in range(n):
            if used[c] or labels[c] != labels[v] or q.degree(c) != q.degree(v):
                continue
            if all((image[x] in q.adj[c]) == (x in q.adj[v]) for x in range(v)):
                image[v] = c
                used[c] = True
                extend(v + 1)
                used[c] = False
        image[v] = -1

    extend(0)
    return out


@dataclass(frozen=True)
class PartialOrder:
    """Pairs ``(a, b)`` meaning a match must satisfy ``f(a) < f(b)``."""

    pairs: frozenset[tuple[int, int]] = frozenset()

    def closure(self) -> frozenset[tuple[int, int]]:
        pairs = set(self.pairs)
        changed = True
        while changed:
            changed = False
            for (a, b), (c, d) in itertools.product(list(pairs), repeat=2):
                if b == c and (a, d) not in pairs:
                    pairs.add((a, d))
                    changed = True
        return frozenset(pairs)

    def restricted(self, vertices: Iterable[int]) -> "PartialOrder":
        vs = set(vertices)
        return PartialOrder(frozenset((a, b) for a, b in self.closure() if a in vs and b in vs))

    def is_acyclic(self) -> bool:
        return all(a != b for a, b in self.closure())

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(sorted(self.pairs))


def _orbits(perms: Sequence[tuple[int, ...]], n: int) -> list[set[int]]:
    seen: set[int] = set()
    orbits = []
    for v in range(n):
        if v in seen:
            continue
        orb = {p[v] for p in perms}
        seen |= orb
        orbits.append(orb)
    return orbits


def symmetry_break_order(q: QueryGraph) -> PartialOrder:
    """Orbit/stabilizer construction.

    Repeatedly take the smallest vertex whose orbit under the current group is
    non-trivial, require it to map below every other orbit member, and pass to
    its stabilizer, until only the identity remains.
    """
    group = automorphisms(q)
    pairs: set[tuple[int, int]] = set()
    while len(group) > 1:
        for orb in _orbits(group, q.n):
            if len(orb) > 1:
                rep = min(orb)
                pairs |= {(rep, x) for x in orb if x != rep}
                group = [p for p in group if p[rep] == rep]
                break
    return PartialOrder(frozenset(pairs))


def count_linear_extensions(vertices: Sequence[int], order: PartialOrder) -> int:
    """Number of total orders of ``vertices`` consistent with ``order`` (subset DP)."""
    vs = list(vertices)
    idx = {v: i for i, v in enumerate(vs)}
    k = len(vs)
    preds = [0] * k
    for a, b in order.closure():
        if a in idx and b in idx:
            preds[idx[b]] |= 1 << idx[a]
    ways = [0] * (1 << k)
    ways[0] = 1
    for mask in range(1 << k):
        if not ways[mask]:
            continue
        for i in range(k):
            bit = 1 << i
            if not mask & bit and preds[i] & mask == preds[i]:
                ways[mask | bit] += ways[mask]
    return ways[(1 << k) - 1]


# ---------------------------------------------------------------- covers & units

def _connected(q: QueryGraph, vertices: set[int]) -> bool:
    if not vertices:
        return False
    start = next(iter(vertices))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for x in q.adj[v] & vertices:
            if x not in seen:
                seen.add(x)
                stack.append(x)
    return seen == vertices


def min_connected_vertex_cover(q: QueryGraph) -> frozenset[int]:
    """Smallest vertex set covering every edge with a connected induced subgraph.

    Subsets are tried by increasing size in lexicographic order, so the
    lexicographically smallest minimum cover wins.
    """
    if not q.edges:
        return frozenset({0})
    for size in range(1, q.n + 1):
        for combo in itertools.combinations(range(q.n), size):
            cs = set(combo)
            if all(a in cs or b in cs for a, b in q.edges) and _connected(q, cs):
                return frozenset(cs)
    raise AssertionError("unreachable: V_Q covers every edge")


@dataclass(frozen=True)
class JoinUnit:
    """A star ``(root, leaves)`` or a clique ``(vertices)``."""

    kind: str
    vertices: frozenset[int]
    root: Optional[int] = None

    @classmethod
    def star(cls, root: int, leaves: Iterable[int]) -> "JoinUnit":
        leaves = frozenset(leaves)
        if not leaves or root in leaves:
            raise ValueError("star needs a non-empty leaf set excluding the root")
        return cls("star", leaves | {root}, root)

    @classmethod
    def clique(cls, vertices: Iterable[int]) -> "JoinUnit":
        vs = frozenset(vertices)
        if len(vs) < 2:
            raise ValueError("clique needs at least two vertices")
        return cls("clique", vs)

    @property
    def leaves(self) -> frozenset[int]:
        return self.vertices - {self.root} if self.kind == "star" else frozenset()

    @property
    def is_twintwig(self) -> bool:
        return self.kind == "star" and len(self.leaves) <= 2

    def edge_set(self) -> frozenset[tuple[int, int]]:
        if self.kind == "star":
            return frozenset((min(self.root, x), max(self.root, x)) for x in self.leaves)
        return frozenset(itertools.combinations(sorted(self.vertices), 2))

    def is_subgraph_of(self, q: QueryGraph) -> bool:
        return self.edge_set() <= q.edges

    def __str__(self) -> str:
        if self.kind == "star":
            leaves = ",".join(f"v{x}" for x in sorted(self.leaves))
            return f"Star(v{self.root};{{{leaves}}})"
        return "Clique({" + ",".join(f"v{x}" for x in sorted(self.vertices)) + "})"


def cliques(q: QueryGraph, min_size: int = 3) -> list[frozenset[int]]:
    out = []
    for size in range(min_size, q.n + 1):
        for combo in itertools.combinations(range(q.n), size):
            if all(q.has_edge(a, b) for a, b in itertools.combinations(combo, 2)):
                out.append(frozenset(combo))
    return out


def enumerate_join_units(q: QueryGraph, triangle_indexed: bool) -> list[JoinUnit]:
    """Maximal stars rooted at every vertex, plus cliques of size >= 3 when indexed."""
    units = [JoinUnit.star(v, q.adj[v]) for v in range(q.n) if q.adj[v]]
    if triangle_indexed:
        units += [JoinUnit.clique(c) for c in cliques(q)]
    return units


# ---------------------------------------------------------------- core / crystals

@dataclass(frozen=True)
class Crystal:
    clique_vertices: frozenset[int]
    buds: frozenset[int]

    @property
    def x(self) -> int:
        return len(self.clique_vertices)

    @property
    def y(self) -> int:
        return len(self.buds)


@dataclass(frozen=True)
class CoreCrystal:
    core: frozenset[int]
    core_edges: frozenset[tuple[int, int]]
    crystals: tuple[Crystal, ...]

    def crystal_edges(self) -> set[tuple[int, int]]:
        return {
            (min(a, b), max(a, b))
            for c in self.crystals for b in c.buds for a in c.clique_vertices
        }


def core_crystal_decompose(q: QueryGraph) -> CoreCrystal:
    """Core = subgraph induced by the minimum connected cover; every other
    vertex is a bud attached to its (cover-only) neighborhood. Buds with the
    same neighborhood share one crystal.

    A bud's neighborhood need not induce a clique in ``q`` (e.g. the 4-cycle);
    the compressed bud candidates are the intersection of that neighborhood's
    matches either way.
    """
    cover = min_connected_vertex_cover(q)
    groups: dict[frozenset[int], set[int]] = {}
    for v in range(q.n):
        if v in cover:
            continue
        nbrs = q.adj[v]
        assert nbrs <= cover, "non-cover vertex adjacent to a non-cover vertex"
        groups.setdefault(frozenset(nbrs), set()).add(v)
    crystals = tuple(
        Crystal(vx, frozenset(vy))
        for vx, vy in sorted(groups.items(), key=lambda kv: (sorted(kv[0]), sorted(kv[1])))
    )
    return CoreCrystal(cover, frozenset(q.induced(cover)), crystals)
