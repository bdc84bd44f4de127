"""Per-worker graph partitions: hash partition and triangle partition.

A worker owns vertex ``u`` iff ``owner(u) == worker_id`` and stores its full
neighbor list. Triangle partitions additionally keep an overlay of edges among
the neighbors of owned vertices, so a worker can close triangles through any
owned vertex without asking its peers.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graph import DataGraph, GraphFormatError

MODES = ("hash", "triangle", "triangle_ordered")
_MODE_ALIASES = {"tri": "triangle", "tri-ordered": "triangle_ordered", "tri_ordered": "triangle_ordered"}
_OVERLAY_HEADER = struct.Struct("<qqqq")


def normalize_mode(mode: str) -> str:
    mode = _MODE_ALIASES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"unknown partition mode {mode!r}")
    return mode


@dataclass(frozen=True)
class PartitionConfig:
    num_workers: int
    mode: str = "hash"
    seed: Optional[int] = None

    def __post_init__(self):
        if self.num_workers < 1:
            raise ValueError("num_workers must be >= 1")
        object.__setattr__(self, "mode", normalize_mode(self.mode))

    def owner_fn(self) -> "Owner":
        return Owner(self.num_workers, self.seed)


_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Owner:
    """Vertex-to-worker map: ``u mod w``, or a seeded multiplicative hash."""

    num_workers: int
    seed: Optional[int] = None

    def __call__(self, u: int) -> int:
        if self.seed is None:
            return u % self.num_workers
        mult = ((2 * self.seed + 1) * 0x9E3779B97F4A7C15) & _MASK64
        return (((u * mult) & _MASK64) >> 17) % self.num_workers


@dataclass
class GraphPartition:
    worker_id: int
    num_workers: int
    mode: str
    owned: dict[int, tuple[int, ...]]
    overlay: dict[int, tuple[int, ...]] = field(default_factory=dict)
    labels: Optional[list[int]] = None
    owner: Optional[Owner] = field(default=None, repr=False)
    num_vertices: int = 0

    def __post_init__(self):
        if self.owner is None:
            self.owner = Owner(self.num_workers)
        self._sets: dict[int, frozenset[int]] = {}

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_sets"] = {}
        return state

    def is_owned(self, u: int) -> bool:
        return u in self.owned

    def neighbors(self, u: int) -> tuple[int, ...]:
        """Virtual neighbor function: full list if owned, else overlay entries."""
        got = self.owned.get(u)
        if got is not None:
            return got
        return self.overlay.get(u, ())

    def neighbor_set(self, u: int) -> frozenset[int]:
        s = self._sets.get(u)
        if s is None:
            s = self._sets[u] = frozenset(self.neighbors(u))
        return s

    def degree(self, u: int) -> int:
        return len(self.owned[u])

    def label(self, u: int) -> Optional[int]:
        return None if self.labels is None else self.labels[u]

    @property
    def extra_edges(self) -> set[tuple[int, int]]:
        return {(a, b) for a, nbrs in self.overlay.items() for b in nbrs if a < b}


def _base_partitions(g: DataGraph, cfg: PartitionConfig) -> list[GraphPartition]:
    owner = cfg.owner_fn()
    owned: list[dict[int, tuple[int, ...]]] = [{} for _ in range(cfg.num_workers)]
    for u, nbrs in enumerate(g.adj_lists):
        owned[owner(u)][u] = nbrs
    return [
        GraphPartition(k, cfg.num_workers, cfg.mode, owned[k], {}, g.label_list, owner, g.num_vertices)
        for k in range(cfg.num_workers)
    ]


def hash_partition(g: DataGraph, w: int, seed: Optional[int] = None) -> list[GraphPartition]:
    if w < 1:
        raise ValueError("number of workers must be >= 1")
    return _base_partitions(g, PartitionConfig(w, "hash", seed))


def triangle_partition(g: DataGraph, w: int, ordered: bool = False, seed: Optional[int] = None) -> list[GraphPartition]:
    """Hash partition plus, per owned ``u``, every edge among ``N(u)``.

    With ``ordered`` only edges ``(u', u'')`` with ``u < u' < u''`` are kept.
    Closing edges are found by sorted-set intersection of neighbor lists.
    """
    if w < 1:
        raise ValueError("number of workers must be >= 1")
    cfg = PartitionConfig(w, "triangle_ordered" if ordered else "triangle", seed)
    parts = _base_partitions(g, cfg)
    sets = g.adj_sets
    for part in parts:
        overlay: dict[int, set[int]] = {}
        for u, nbrs in part.owned.items():
            nset = sets[u]
            for a in nbrs:
                if ordered and a <= u:
                    continue
                for b in sets[a] & nset:
                    if a < b and (not ordered or u < a):
                        overlay.setdefault(a, set()).add(b)
                        overlay.setdefault(b, set()).add(a)
        part.overlay = {k: tuple(sorted(v)) for k, v in overlay.items()}
    return parts


def make_partitions(g: DataGraph, w: int, mode: str = "hash", seed: Optional[int] = None) -> list[GraphPartition]:
    mode = normalize_mode(mode)
    if mode == "hash":
        return hash_partition(g, w, seed)
    return triangle_partition(g, w, ordered=(mode == "triangle_ordered"), seed=seed)


@dataclass(frozen=True)
class PartitionSize:
    worker_id: int
    owned_entries: int
    extra_edges: int

    @property
    def total(self) -> int:
        return self.owned_entries + self.extra_edges


def partition_sizes(parts: Sequence[GraphPartition]) -> list[PartitionSize]:
    return [
        PartitionSize(p.worker_id, sum(len(n) for n in p.owned.values()), len(p.extra_edges))
        for p in parts
    ]


def dump_partitions(parts: Sequence[GraphPartition], directory: str | Path) -> list[Path]:
    """Write one binary file per worker.

    Layout (little-endian int64): header (worker_id, num_workers, n_owned,
    n_overlay), then per owned vertex ``u, d, nbrs...``, then per overlay
    vertex ``u, d, nbrs...``. The mode is stored in a sidecar ``mode`` file.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for p in parts:
        ints: list[int] = []
        for table in (p.owned, p.overlay):
            for u in sorted(table):
                nbrs = table[u]
                ints.append(u)
                ints.append(len(nbrs))
                ints.extend(nbrs)
        path = directory / f"part-{p.worker_id:04d}.bin"
        with open(path, "wb") as f:
            f.write(_OVERLAY_HEADER.pack(p.worker_id, p.num_workers, len(p.owned), len(p.overlay)))
            f.write(np.asarray(ints, dtype="<i8").tobytes())
        paths.append(path)
    (directory / "mode").write_text(parts[0].mode if parts else "hash")
    return paths


def restore_partitions(directory: str | Path, labels: Optional[list[int]] = None) -> list[GraphPartition]:
    directory = Path(directory)
    mode = (directory / "mode").read_text().strip()
    parts = []
    for path in sorted(directory.glob("part-*.bin")):
        raw = path.read_bytes()
        wid, w, n_owned, n_overlay = _OVERLAY_HEADER.unpack_from(raw)
        data = np.frombuffer(raw, dtype="<i8", offset=_OVERLAY_HEADER.size).tolist()
        pos = 0
        tables: list[dict[int, tuple[int, ...]]] = []
        for count in (n_owned, n_overlay):
            table = {}
            for _ in range(count):
                u, d = data[pos], data[pos + 1]
                table[u] = tuple(data[pos + 2: pos + 2 + d])
                pos += 2 + d
            tables.append(table)
        if pos != len(data):
            raise GraphFormatError(f"{path}: trailing data")
        parts.append(GraphPartition(wid, w, mode, tables[0], tables[1], labels))
    return parts
