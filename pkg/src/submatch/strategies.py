"""End-to-end strategies: BinJoin, WOptJoin, ShrCube and FullRep.

Each strategy plans on the driver, then runs an SPMD worker program on the
cluster runtime. Workers return counts (and, on request, concrete matches as
tuples indexed by query vertex).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from operator import itemgetter
from typing import Any, Callable, Optional, Sequence

from .constraints import MatchConstraints
from .graph import DataGraph
from .matcher import GraphView, LocalGraph, local_match, local_order
from .partition import GraphPartition, make_partitions
from .planner import (
    BinJoinPlan,
    CostModel,
    HypercubeShares,
    WOptOrder,
    build_woptjoin_order,
    choose_matching_order,
    hypercube_shares,
    plan_binjoin,
)
from .query import JoinUnit, PartialOrder, QueryGraph, symmetry_break_order
from .runtime.batching import split_candidates
from .runtime.cluster import Counters, ExecutionError, WorkerCtx, run_cluster
from .runtime.extend import LevelPlan, count_propose_intersect
from .runtime.join import JoinConfig, hash_join, key_hash
from .runtime.records import Expander, Relation

STRATEGIES = ("binjoin", "woptjoin", "shrcube", "fullrep")
OUTPUTS = ("count", "enumerate")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str = "woptjoin"
    batching: bool = False
    trindexing: bool = False
    compression: bool = False
    batch_size: int = 1_000_000
    output: str = "count"
    join_buffer: int = 1 << 20
    order_mode: str = "auto"
    cost_mode: str = "er"
    ordered_partition: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.output not in OUTPUTS:
            raise ConfigError(f"unknown output mode {self.output!r}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.strategy in ("shrcube", "fullrep"):
            # the three optimizations do not apply to these strategies
            for flag in ("batching", "trindexing", "compression", "ordered_partition"):
                object.__setattr__(self, flag, False)

    @property
    def opts(self) -> str:
        names = [n for n, on in (("batching", self.batching), ("trindexing", self.trindexing),
                                 ("compression", self.compression)) if on]
        return "+".join(names) or "none"

    @property
    def partition_mode(self) -> str:
        if self.trindexing:
            return "triangle_ordered" if self.ordered_partition else "triangle"
        return "hash"


def flag_combinations(strategy: str) -> list[StrategyConfig]:
    """Every applicable optimization combination for ``strategy``."""
    if strategy in ("shrcube", "fullrep"):
        return [StrategyConfig(strategy)]
    return [
        StrategyConfig(strategy, batching=b, trindexing=t, compression=c)
        for b, t, c in itertools.product((False, True), repeat=3)
    ]


@dataclass
class WorkerOutput:
    count: int = 0
    matches: Optional[list[tuple[int, ...]]] = None
    level_counts: Optional[list[int]] = None
    stats: dict[str, Any] = field(default_factory=dict)


@dataclass
class RunResult:
    query: str
    strategy: str
    opts: str
    count: int
    matches: Optional[list[tuple[int, ...]]]
    counters: list[Counters]
    per_worker: list[WorkerOutput]
    plan: Any = None
    level_counts: Optional[list[int]] = None

    @property
    def T(self) -> float:
        return max((c.total_time for c in self.counters), default=0.0)

    @property
    def T_comp(self) -> float:
        return max(self.counters, key=lambda c: c.total_time).comp_time if self.counters else 0.0

    @property
    def T_comm(self) -> float:
        return max(self.T - self.T_comp, 0.0)

    @property
    def max_recv_integers(self) -> int:
        return max((c.recv_integers for c in self.counters), default=0)

    @property
    def total_recv_integers(self) -> int:
        return sum(c.recv_integers for c in self.counters)

    @property
    def total_sent_integers(self) -> int:
        return sum(c.sent_integers for c in self.counters)

    @property
    def peak_mem(self) -> int:
        return max((c.peak_mem for c in self.counters), default=0)

    def metrics(self) -> dict[str, Any]:
        return {
            "query": self.query,
            "strategy": self.strategy,
            "opts": self.opts,
            "T": round(self.T, 6),
            "T_comp": round(self.T_comp, 6),
            "T_comm": round(self.T_comm, 6),
            "max_recv_integers": self.max_recv_integers,
            "peak_mem": self.peak_mem,
            "result_count": self.count,
        }


# ---------------------------------------------------------------- planning

def _cost_model(g: Optional[DataGraph], parts: Optional[Sequence[GraphPartition]], mode: str) -> CostModel:
    if g is not None:
        return CostModel.from_graph(g, mode)
    n = max((max(p.owned, default=-1) for p in parts), default=-1) + 1
    m = sum(len(v) for p in parts for v in p.owned.values()) // 2
    freqs: dict[int, int] = {}
    labels = parts[0].labels if parts else None
    if labels is not None:
        for lab in labels:
            freqs[lab] = freqs.get(lab, 0) + 1
    return CostModel("er", n, m, (), tuple(sorted(freqs.items())))


def query_order(q: QueryGraph, override: Optional[PartialOrder] = None) -> Optional[PartialOrder]:
    """Order constraint in force: none for labelled queries."""
    if q.labelled:
        return None
    return override if override is not None else symmetry_break_order(q)


def make_plan(q: QueryGraph, cfg: StrategyConfig, model: CostModel, num_workers: int, order: Optional[PartialOrder] = None):
    order = query_order(q, order)
    label_freq = dict(model.label_frequencies) if q.labelled else None
    if cfg.strategy == "woptjoin":
        vertices, kind = choose_matching_order(q, cfg.order_mode, label_freq)
        ordered_with = (order or PartialOrder()) if cfg.ordered_partition else None
        return build_woptjoin_order(q, vertices, kind, cfg.trindexing, cfg.compression, ordered_with)
    if cfg.strategy == "binjoin":
        return plan_binjoin(q, model, cfg.trindexing, cfg.compression, cfg.batching, None, order)
    if cfg.strategy == "shrcube":
        return hypercube_shares(q, num_workers, model)
    return local_order(q)


# ---------------------------------------------------------------- driver

def run_strategy(
    q: QueryGraph,
    g: Optional[DataGraph],
    cfg: StrategyConfig,
    num_workers: int = 1,
    deployment: str = "threads",
    time_limit: Optional[float] = None,
    mem_limit: Optional[int] = None,
    partitions: Optional[Sequence[GraphPartition]] = None,
    plan: Any = None,
    order: Optional[PartialOrder] = None,
    plan_hook: Optional[Callable[[Any], Any]] = None,
    spill_dir: Optional[str] = None,
) -> RunResult:
    """Plan and execute ``q`` on ``g`` (or prebuilt ``partitions``)."""
    if g is None and partitions is None:
        raise ConfigError("need a data graph or partitions")
    if partitions is not None:
        num_workers = len(partitions)
    if num_workers < 1:
        raise ConfigError("num_workers must be >= 1")
    if cfg.strategy == "fullrep" and g is None:
        raise ConfigError("fullrep needs the whole data graph on every worker")
    model = _cost_model(g, partitions, cfg.cost_mode)
    if plan is None:
        plan = make_plan(q, cfg, model, num_workers, order)
    if plan_hook is not None:
        plan = plan_hook(plan)
    constraints = MatchConstraints.for_query(q, order)

    if cfg.strategy == "fullrep":
        job = _FullRepJob(q, constraints, plan, cfg.output == "enumerate")
        res = run_cluster(_fullrep_worker, [g] * num_workers, job, deployment, time_limit, mem_limit)
        return _collect(q, cfg, res, plan)

    needed = cfg.partition_mode if cfg.strategy != "shrcube" else "hash"
    if partitions is None:
        partitions = make_partitions(g, num_workers, needed)
    else:
        modes = {p.mode for p in partitions}
        if cfg.strategy == "woptjoin" and cfg.trindexing and not modes <= {"triangle", "triangle_ordered"}:
            raise ConfigError("TrIndexing needs a triangle partition")
    num_vertices = max(model.num_vertices, max((max(p.owned, default=-1) for p in partitions), default=-1) + 1)
    labels = partitions[0].labels

    if cfg.strategy == "shrcube":
        if plan.num_cells > num_workers:
            raise ConfigError(f"shares {plan.buckets} need {plan.num_cells} workers, have {num_workers}")
        job = _ShrCubeJob(q, constraints, plan, cfg.output == "enumerate")
        res = run_cluster(_shrcube_worker, partitions, job, deployment, time_limit, mem_limit)
        return _collect(q, cfg, res, plan)

    if cfg.strategy == "binjoin" and any(u.kind == "clique" for u in plan.units()):
        if not all(p.mode in ("triangle", "triangle_ordered") for p in partitions):
            raise ConfigError("clique join units need a triangle partition")
    bv = plan.batching_vertex
    batches: list[Optional[frozenset[int]]] = [None]
    if cfg.batching and bv is not None:
        cands = [u for u in range(num_vertices) if constraints.label_ok(bv, u, labels)]
        batches = list(split_candidates(cands, cfg.batch_size))

    if cfg.strategy == "woptjoin":
        job = _WOptJob(q, constraints, plan, batches, cfg.output == "enumerate")
        res = run_cluster(_wopt_worker, partitions, job, deployment, time_limit, mem_limit)
    else:
        job = _BinJoinJob(q, constraints, plan, batches, cfg.output == "enumerate",
                          JoinConfig(cfg.join_buffer, spill_dir))
        res = run_cluster(_binjoin_worker, partitions, job, deployment, time_limit, mem_limit)
    return _collect(q, cfg, res, plan)


def _collect(q: QueryGraph, cfg: StrategyConfig, res, plan) -> RunResult:
    outs: list[WorkerOutput] = res.values
    matches = None
    if cfg.output == "enumerate":
        matches = sorted(m for o in outs for m in (o.matches or ()))
    level_counts = None
    if outs and outs[0].level_counts is not None:
        level_counts = [sum(o.level_counts[i] for o in outs) for i in range(len(outs[0].level_counts))]
    return RunResult(
        q.name, cfg.strategy, cfg.opts, sum(o.count for o in outs), matches, res.counters, outs, plan, level_counts
    )


def _finish(rel: Relation, n: int, constraints: MatchConstraints, enumerate_: bool, out: WorkerOutput) -> None:
    """Expand compressed rows and record the worker's matches. Concrete rows
    were validated when they were built."""
    if enumerate_ and out.matches is None:
        out.matches = []
    inv = [0] * n
    for i, v in enumerate(rel.vars):
        inv[v] = i
    reorder = itemgetter(*inv) if n > 1 else (lambda r: (r[0],))
    if not rel.packed:
        out.count += len(rel.rows)
        if enumerate_:
            out.matches.extend(map(reorder, rel.rows))
        return
    expand = Expander(rel.vars, constraints)
    for row in rel.rows:
        if any(type(x) is tuple for x in row):
            flats = list(expand(row))
        else:
            flats = (row,)
        out.count += len(flats)
        if enumerate_:
            out.matches.extend(map(reorder, flats))


# ---------------------------------------------------------------- WOptJoin

@dataclass
class _WOptJob:
    q: QueryGraph
    constraints: MatchConstraints
    order: WOptOrder
    batches: list
    enumerate: bool


def woptjoin_levels(order: WOptOrder) -> list[LevelPlan]:
    vs = order.vertices
    return [LevelPlan.build(vs[:i], vs[i], order.groups[i], order.compressed[i]) for i in range(1, len(vs))]


def _wopt_worker(ctx: WorkerCtx, job: _WOptJob) -> WorkerOutput:
    order, cons = job.order, job.constraints
    part = ctx.partition
    v0 = order.vertices[0]
    levels = woptjoin_levels(order)
    out = WorkerOutput(level_counts=[0] * len(order.vertices))
    for batch in job.batches:
        with ctx.compute():
            rows = [
                (u,) for u in sorted(part.owned)
                if cons.label_ok(v0, u, part.labels) and (batch is None or u in batch)
            ]
        out.level_counts[0] += len(rows)
        for i, lp in enumerate(levels, start=1):
            rows = count_propose_intersect(ctx, rows, lp, cons)
            out.level_counts[i] += len(rows)
        with ctx.compute():
            _finish(Relation(order.vertices, rows, frozenset(v for v, c in zip(order.vertices, order.compressed) if c)), job.q.n, cons, job.enumerate, out)
    return out


# ---------------------------------------------------------------- BinJoin

@dataclass
class _BinJoinJob:
    q: QueryGraph
    constraints: MatchConstraints
    plan: BinJoinPlan
    batches: list
    enumerate: bool
    join_cfg: JoinConfig


def _binjoin_worker(ctx: WorkerCtx, job: _BinJoinJob) -> WorkerOutput:
    out = WorkerOutput()
    plan = job.plan
    bv = plan.batching_vertex
    recomputed = [u for u in plan.units() if bv is not None and bv not in u.vertices]
    out.stats["recomputed_units_per_batch"] = len(recomputed)
    out.stats["intermediate"] = 0
    out.stats["node_rows"] = {}
    for batch in job.batches:
        rel = _eval_node(ctx, job, plan.root, batch, out)
        with ctx.compute():
            _finish(rel, job.q.n, job.constraints, job.enumerate, out)
    return out


def _eval_node(ctx: WorkerCtx, job: _BinJoinJob, node, batch, out: WorkerOutput) -> Relation:
    if node.is_leaf:
        with ctx.compute():
            unit = node.unit
            comp = job.plan.compressed.get(unit, frozenset())
            if unit.kind == "star":
                rel = star_matches(ctx, unit, job.constraints, comp, job.plan.batching_vertex, batch)
            else:
                rel = clique_matches(ctx, unit, job.constraints, comp, job.plan.batching_vertex, batch)
        _note_rows(out, node, rel)
        return rel
    left = _eval_node(ctx, job, node.left, batch, out)
    right = _eval_node(ctx, job, node.right, batch, out)
    key = sorted(set(left.vars) & set(right.vars))
    lk = [left.vars.index(v) for v in key]
    rk = [right.vars.index(v) for v in key]
    lrows = ctx.shuffle(left.rows, lambda r: key_hash(tuple(r[i] for i in lk)))
    rrows = ctx.shuffle(right.rows, lambda r: key_hash(tuple(r[i] for i in rk)))
    with ctx.compute():
        rel = hash_join(
            left.vars, lrows, right.vars, rrows, job.constraints, job.join_cfg, ctx.counters, ctx.tick,
            packed=left.packed | right.packed,
        )
    _note_rows(out, node, rel)
    return rel


def _note_rows(out: WorkerOutput, node, rel: Relation) -> None:
    out.stats["intermediate"] += len(rel.rows)
    rows = out.stats["node_rows"]
    rows[node.edges] = rows.get(node.edges, 0) + len(rel.rows)


def _vertex_ok(cons: MatchConstraints, v: int, u: int, labels, bv, batch) -> bool:
    if not cons.label_ok(v, u, labels):
        return False
    return batch is None or v != bv or u in batch


def star_matches(
    ctx: WorkerCtx, unit: JoinUnit, cons: MatchConstraints, compressed: frozenset[int],
    bv: Optional[int] = None, batch: Optional[frozenset[int]] = None,
) -> Relation:
    """Matches of a star rooted at every owned vertex; non-key leaves listed in
    ``compressed`` are kept as candidate arrays."""
    part = ctx.partition
    labels = part.labels
    r = unit.root
    vars_ = tuple(sorted(unit.vertices))
    idx = {v: i for i, v in enumerate(vars_)}
    leaves = sorted(unit.leaves)
    concrete = [x for x in leaves if x not in compressed]
    packed = [x for x in leaves if x in compressed]
    rows = []
    for u in sorted(part.owned):
        if not _vertex_ok(cons, r, u, labels, bv, batch):
            continue
        nbrs = part.owned[u]
        assigned = {r: u}
        cand = {
            x: [c for c in nbrs if _vertex_ok(cons, x, c, labels, bv, batch) and cons.order_ok(x, c, assigned)]
            for x in leaves
        }
        if any(not cand[x] for x in leaves):
            continue
        row = [None] * len(vars_)
        row[idx[r]] = u
        used = {u}

        def emit() -> None:
            for x in packed:
                arr = tuple(c for c in cand[x] if c not in used and cons.order_ok(x, c, assigned))
                if not arr:
                    return
                row[idx[x]] = arr
            rows.append(tuple(row))

        def go(k: int) -> None:
            if k == len(concrete):
                emit()
                return
            x = concrete[k]
            for c in cand[x]:
                if c in used or not cons.order_ok(x, c, assigned):
                    continue
                used.add(c)
                assigned[x] = c
                row[idx[x]] = c
                go(k + 1)
                used.discard(c)
                del assigned[x]
            ctx.tick()

        go(0)
    return Relation(vars_, rows, frozenset(compressed))


def clique_matches(
    ctx: WorkerCtx, unit: JoinUnit, cons: MatchConstraints, compressed: frozenset[int],
    bv: Optional[int] = None, batch: Optional[frozenset[int]] = None,
) -> Relation:
    """Matches of a clique unit. Each data clique is found once cluster-wide,
    at the owner of its smallest vertex, using the triangle overlay for the
    edges among that vertex's larger neighbors."""
    part = ctx.partition
    if part.mode not in ("triangle", "triangle_ordered"):
        raise ExecutionError("clique join unit evaluated without a triangle partition")
    labels = part.labels
    vars_ = tuple(sorted(unit.vertices))
    k = len(vars_)
    data_cliques: list[tuple[int, ...]] = []
    for u in sorted(part.owned):
        higher = [c for c in part.owned[u] if c > u]
        chosen = [u]

        def grow(start: int) -> None:
            if len(chosen) == k:
                data_cliques.append(tuple(chosen))
                return
            for i in range(start, len(higher)):
                c = higher[i]
                if all(c in part.neighbor_set(x) for x in chosen[1:]):
                    chosen.append(c)
                    grow(i + 1)
                    chosen.pop()
            ctx.tick()

        grow(0)
    rows = []
    for dc in data_cliques:
        for perm in itertools.permutations(dc):
            assigned: dict[int, int] = {}
            good = True
            for v, c in zip(vars_, perm):
                if not _vertex_ok(cons, v, c, labels, bv, batch) or not cons.order_ok(v, c, assigned):
                    good = False
                    break
                assigned[v] = c
            if good:
                rows.append(perm)
    if compressed:
        (x,) = tuple(compressed)
        i = vars_.index(x)
        grouped: dict[tuple, list[int]] = {}
        for row in rows:
            grouped.setdefault(row[:i] + row[i + 1:], []).append(row[i])
        rows = [key[:i] + (tuple(sorted(vals)),) + key[i:] for key, vals in grouped.items()]
    return Relation(vars_, rows, frozenset(compressed))


# ---------------------------------------------------------------- ShrCube

@dataclass
class _ShrCubeJob:
    q: QueryGraph
    constraints: MatchConstraints
    shares: HypercubeShares
    enumerate: bool
    dedup: bool = True


def shrcube_destinations(shares: HypercubeShares, a: int, b: int, za: int, zb: int) -> list[int]:
    """Workers whose coordinates are ``za`` on dimension ``a`` and ``zb`` on ``b``."""
    ranges = [range(bk) for bk in shares.buckets]
    ranges[a] = (za,)
    ranges[b] = (zb,)
    return [shares.worker_of(c) for c in itertools.product(*ranges)]


def _shrcube_worker(ctx: WorkerCtx, job: _ShrCubeJob) -> WorkerOutput:
    part, q, shares, cons = ctx.partition, job.q, job.shares, job.constraints
    labels = part.labels
    b = shares.buckets
    with ctx.compute():
        dest_cache: dict[tuple, list[int]] = {}
        outgoing: dict[int, set[tuple[int, int]]] = {}
        qedges = q.sorted_edges()
        for u, nbrs in part.owned.items():
            for u2 in nbrs:
                for va, vb in qedges:
                    if not (cons.label_ok(va, u, labels) and cons.label_ok(vb, u2, labels)):
                        continue
                    key = (va, vb, u % b[va], u2 % b[vb])
                    dests = dest_cache.get(key)
                    if dests is None:
                        dests = dest_cache[key] = shrcube_destinations(shares, *key)
                    for d in dests:
                        outgoing.setdefault(d, set()).add((u, u2))
        outgoing_lists = {d: sorted(s) for d, s in outgoing.items()}
    received = ctx.exchange(outgoing_lists)
    out = WorkerOutput()
    with ctx.compute():
        local = LocalGraph(labels=labels)
        raw = 0
        for batch in received:
            raw += len(batch)
            for u, u2 in batch:
                local.add_edge(u, u2)
        local.freeze()
        out.stats["received_edges_raw"] = raw
        out.stats["local_edges"] = local.num_edges
        if ctx.worker_id >= shares.num_cells:
            out.matches = [] if job.enumerate else None
            return out
        coords = shares.coords_of(ctx.worker_id)

        def in_cell(v: int, u: int) -> bool:
            return u % b[v] == coords[v]

        found = local_match(q, local, cons, in_cell if job.dedup else None, ctx.tick)
        out.count = len(found)
        if job.enumerate:
            out.matches = found
    return out


def run_shrcube_cells(q: QueryGraph, g: DataGraph, shares: HypercubeShares, dedup: bool) -> list[list[tuple[int, ...]]]:
    """Per-cell match lists; with ``dedup=False`` every cell reports all local
    matches, which exposes the duplicates the coordinate rule removes."""
    cons = MatchConstraints.for_query(q)
    parts = make_partitions(g, shares.num_cells, "hash")
    res = run_cluster(_shrcube_worker, parts, _ShrCubeJob(q, cons, shares, True, dedup))
    return [o.matches for o in res.values]


# ---------------------------------------------------------------- FullRep

@dataclass
class _FullRepJob:
    q: QueryGraph
    constraints: MatchConstraints
    order: tuple[int, ...]
    enumerate: bool


def _fullrep_worker(ctx: WorkerCtx, job: _FullRepJob) -> WorkerOutput:
    g: DataGraph = ctx.partition
    first = job.order[0]
    w, k = ctx.num_workers, ctx.worker_id
    out = WorkerOutput()
    with ctx.compute():
        view = GraphView(g)

        def round_robin(v: int, u: int) -> bool:
            return v != first or u % w == k

        found = local_match(job.q, view, job.constraints, round_robin, ctx.tick)
        out.count = len(found)
        if job.enumerate:
            out.matches = found
    return out


def with_config(cfg: StrategyConfig, **changes) -> StrategyConfig:
    return replace(cfg, **changes)
