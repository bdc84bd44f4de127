"""Data graphs in compressed-sparse-row form.

Graphs are undirected and simple. Vertex ids are dense in ``[0, N)`` and,
after :func:`relabel_by_degree`, non-decreasing in degree.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

HEADER = struct.Struct("<qqq")


class GraphFormatError(ValueError):
    """Raised on malformed edge-list, label or CSR input."""


@dataclass(frozen=True, eq=False)
class DataGraph:
    offsets: np.ndarray
    adjacency: np.ndarray
    labels: Optional[np.ndarray] = None
    original_ids: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.offsets) - 1

    @property
    def num_edges(self) -> int:
        return len(self.adjacency) // 2

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def degree(self, u: int) -> int:
        return int(self.offsets[u + 1] - self.offsets[u])

    def neighbors(self, u: int) -> np.ndarray:
        if not 0 <= u < self.num_vertices:
            raise IndexError(f"vertex {u} out of range [0, {self.num_vertices})")
        return self.adjacency[self.offsets[u]:self.offsets[u + 1]]

    def label(self, u: int) -> Optional[int]:
        return None if self.labels is None else int(self.labels[u])

    @cached_property
    def adj_lists(self) -> list[tuple[int, ...]]:
        """Neighbor lists as Python tuples; the matching kernels run on these."""
        adj = self.adjacency.tolist()
        offs = self.offsets.tolist()
        return [tuple(adj[offs[u]:offs[u + 1]]) for u in range(self.num_vertices)]

    @cached_property
    def adj_sets(self) -> list[frozenset[int]]:
        return [frozenset(a) for a in self.adj_lists]

    @cached_property
    def label_list(self) -> Optional[list[int]]:
        return None if self.labels is None else self.labels.tolist()

    def edges(self) -> Iterable[tuple[int, int]]:
        """Each undirected edge once, as ``(u, v)`` with ``u < v``."""
        for u, nbrs in enumerate(self.adj_lists):
            for v in nbrs:
                if u < v:
                    yield u, v

    def validate(self) -> None:
        n = self.num_vertices
        if self.offsets[0] != 0 or np.any(np.diff(self.offsets) < 0):
            raise GraphFormatError("offsets must start at 0 and be non-decreasing")
        if self.offsets[-1] != len(self.adjacency) or len(self.adjacency) % 2:
            raise GraphFormatError("offsets[N] must equal 2M")
        for u, nbrs in enumerate(self.adj_lists):
            if any(b <= a for a, b in zip(nbrs, nbrs[1:])):
                raise GraphFormatError(f"neighbor list of {u} not strictly increasing")
            if u in self.adj_sets[u]:
                raise GraphFormatError(f"self-loop at {u}")
            for v in nbrs:
                if not 0 <= v < n or u not in self.adj_sets[v]:
                    raise GraphFormatError(f"edge ({u},{v}) not symmetric")
        if self.labels is not None and len(self.labels) != n:
            raise GraphFormatError("labels length must equal N")


@dataclass(frozen=True)
class GraphStats:
    num_vertices: int
    num_edges: int
    avg_degree: float
    max_degree: int
    label_frequencies: dict[int, int]


def from_edges(
    num_vertices: int,
    edges: Iterable[tuple[int, int]],
    labels: Optional[Iterable[int]] = None,
    original_ids: Optional[np.ndarray] = None,
) -> DataGraph:
    """Build a simple undirected CSR graph; self-loops and duplicates are dropped."""
    pairs = np.array([(u, v) for u, v in edges if u != v], dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= num_vertices):
        raise GraphFormatError("edge endpoint outside [0, N)")
    both = np.concatenate([pairs, pairs[:, ::-1]]) if len(pairs) else pairs
    both = np.unique(both, axis=0) if len(both) else both
    counts = np.bincount(both[:, 0], minlength=num_vertices) if len(both) else np.zeros(num_vertices, dtype=np.int64)
    offsets = np.zeros(num_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    adjacency = both[:, 1].astype(np.int64) if len(both) else np.zeros(0, dtype=np.int64)
    lab = None if labels is None else np.asarray(list(labels), dtype=np.int64)
    return DataGraph(offsets, adjacency, lab, original_ids)


def _parse_pairs(text: str, what: str) -> list[tuple[int, int, int]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if len(parts) != 2:
                raise ValueError
            a, b = int(parts[0]), int(parts[1])
            if a < 0 or b < 0:
                raise ValueError
        except ValueError:
            raise GraphFormatError(f"{what} line {lineno}: expected two non-negative integers, got {line!r}") from None
        out.append((lineno, a, b))
    return out


def load_edge_list(source: str, labels: Optional[str] = None) -> DataGraph:
    """Parse ``"u v"`` lines (and optional ``"u label"`` lines) into a DataGraph.

    Referenced ids are compacted to ``[0, N)`` preserving their relative order.
    Vertices that only appear in the label text are kept as isolated vertices.
    The result is not yet degree-relabeled.
    """
    edge_rows = _parse_pairs(source, "edge")
    label_rows = _parse_pairs(labels, "label") if labels is not None else []

    label_of: dict[int, int] = {}
    for lineno, v, lab in label_rows:
        if label_of.get(v, lab) != lab:
            raise GraphFormatError(f"label line {lineno}: conflicting label for vertex {v}")
        label_of[v] = lab

    ids = {a for _, a, _ in edge_rows} | {b for _, _, b in edge_rows} | set(label_of)
    original = np.array(sorted(ids), dtype=np.int64)
    index = {int(v): i for i, v in enumerate(original)}

    lab_arr = None
    if labels is not None:
        missing = [int(v) for v in original if int(v) not in label_of]
        if missing:
            raise GraphFormatError(f"no label for vertex {missing[0]}")
        lab_arr = [label_of[int(v)] for v in original]

    edges = [(index[a], index[b]) for _, a, b in edge_rows]
    return from_edges(len(original), edges, lab_arr, original)


def relabel_by_degree(g: DataGraph) -> tuple[DataGraph, np.ndarray]:
    """Renumber vertices by ascending degree, ties by old id.

    Returns the relabeled graph and ``mapping`` with ``mapping[old] = new``.
    """
    n = g.num_vertices
    degrees = np.diff(g.offsets)
    order = np.lexsort((np.arange(n), degrees))  # new -> old
    mapping = np.empty(n, dtype=np.int64)
    mapping[order] = np.arange(n, dtype=np.int64)
    edges = [(int(mapping[u]), int(mapping[v])) for u, v in g.edges()]
    labels = None if g.labels is None else g.labels[order]
    orig = None if g.original_ids is None else g.original_ids[order]
    return from_edges(n, edges, labels, orig), mapping


def neighbors(g: DataGraph, u: int) -> np.ndarray:
    return g.neighbors(u)


def stats(g: DataGraph) -> GraphStats:
    n, m = g.num_vertices, g.num_edges
    degrees = np.diff(g.offsets)
    freqs: dict[int, int] = {}
    if g.labels is not None:
        vals, cnts = np.unique(g.labels, return_counts=True)
        freqs = {int(v): int(c) for v, c in zip(vals, cnts)}
    return GraphStats(
        num_vertices=n,
        num_edges=m,
        avg_degree=(2 * m / n) if n else 0.0,
        max_degree=int(degrees.max()) if n else 0,
        label_frequencies=freqs,
    )


def save_csr(g: DataGraph, path: str | Path) -> None:
    """Binary layout: little-endian int64 header (N, M, has_labels), offsets, adjacency, labels."""
    with open(path, "wb") as f:
        f.write(HEADER.pack(g.num_vertices, g.num_edges, int(g.has_labels)))
        f.write(g.offsets.astype("<i8").tobytes())
        f.write(g.adjacency.astype("<i8").tobytes())
        if g.labels is not None:
            f.write(g.labels.astype("<i8").tobytes())


def load_csr(path: str | Path, mmap: bool = False) -> DataGraph:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(HEADER.size)
    if len(head) != HEADER.size:
        raise GraphFormatError(f"{path}: truncated header")
    n, m, has_labels = HEADER.unpack(head)
    expected = HEADER.size + 8 * ((n + 1) + 2 * m + (n if has_labels else 0))
    if path.stat().st_size != expected:
        raise GraphFormatError(f"{path}: size {path.stat().st_size} != expected {expected}")
    if mmap:
        data = np.memmap(path, dtype="<i8", mode="r", offset=HEADER.size)
    else:
        data = np.fromfile(path, dtype="<i8", offset=HEADER.size)
    offsets = np.asarray(data[: n + 1], dtype=np.int64)
    adjacency = np.asarray(data[n + 1: n + 1 + 2 * m], dtype=np.int64)
    labels = np.asarray(data[n + 1 + 2 * m:], dtype=np.int64) if has_labels else None
    return DataGraph(offsets, adjacency, labels)


def random_graph(n: int, p: float, seed: int, num_labels: int = 0) -> DataGraph:
    """Erdos-Renyi G(n, p), degree-relabeled; optional uniform vertex labels."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    labels = rng.integers(0, num_labels, size=n).tolist() if num_labels else None
    g = from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()), labels)
    return relabel_by_degree(g)[0]


def complete_graph(n: int) -> DataGraph:
    return from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
