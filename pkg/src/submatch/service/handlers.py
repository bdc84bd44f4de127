"""Operations behind every endpoint and CLI subcommand.

Handlers take and return the pydantic models in :mod:`.schemas`; they raise
:class:`ServiceError` for bad input so both front ends can map it.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ..graph import DataGraph, GraphFormatError, load_csr, load_edge_list, relabel_by_degree, save_csr, stats
from ..metrics import OOM, OT, csv_text, failed_row
from ..partition import dump_partitions, make_partitions, partition_sizes, restore_partitions
from ..planner import BinJoinPlan, HypercubeShares, WOptOrder, CostModel
from ..query import CORPUS_NAMES, QueryFormatError, QueryGraph, corpus_query, parse_query
from ..runtime.cluster import MemoryLimitExceeded, TimeLimitExceeded
from ..strategies import ConfigError, make_plan, run_strategy
from ..verify import seeded_graphs, verify
from . import schemas


class ServiceError(Exception):
    def __init__(self, message: str, status_code: int = 400):
        super().__init__(message)
        self.status_code = status_code


def load_graph(path: str) -> DataGraph:
    """A binary CSR file, or an edge list that is ingested on the fly."""
    p = Path(path)
    if not p.is_file():
        raise ServiceError(f"graph file not found: {path}", 404)
    try:
        return load_csr(p)
    except (GraphFormatError, ValueError):
        pass
    try:
        g = load_edge_list(p.read_text())
    except (GraphFormatError, UnicodeDecodeError) as exc:
        raise ServiceError(f"cannot read graph {path}: {exc}") from None
    return relabel_by_degree(g)[0]


def load_query(spec: str) -> QueryGraph:
    if spec in CORPUS_NAMES:
        return corpus_query(spec)
    p = Path(spec)
    if not p.is_file():
        raise ServiceError(f"unknown query {spec!r}: not a corpus name ({', '.join(CORPUS_NAMES)}) or a file", 404)
    try:
        return parse_query(p.read_text(), p.stem)
    except QueryFormatError as exc:
        raise ServiceError(f"cannot read query {spec}: {exc}") from None


def plan_to_dict(plan: Any) -> dict[str, Any]:
    if isinstance(plan, (BinJoinPlan, WOptOrder)):
        return plan.to_dict()
    if isinstance(plan, HypercubeShares):
        return {"kind": "shrcube", "buckets": list(plan.buckets)}
    return {"kind": "fullrep", "order": list(plan)}


def plan_from_dict(data: dict[str, Any], strategy: str) -> Any:
    """Inverse of :func:`plan_to_dict`, for replaying a dumped plan."""
    kind = data.get("kind")
    if kind != strategy:
        raise ServiceError(f"plan is for {kind!r}, not {strategy!r}")
    try:
        if kind == "binjoin":
            return BinJoinPlan.from_dict(data)
        if kind == "woptjoin":
            return WOptOrder.from_dict(data)
        if kind == "shrcube":
            return HypercubeShares(tuple(data["buckets"]))
        return tuple(data["order"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ServiceError(f"malformed plan: {exc!r}") from None


def plan_text(plan: Any) -> str:
    if hasattr(plan, "describe"):
        return plan.describe()
    if isinstance(plan, HypercubeShares):
        return f"ShrCube shares {plan.buckets} over {plan.num_cells} cells"
    return "FullRep local order " + " ".join(f"v{v}" for v in plan)


# ---------------------------------------------------------------- operations

def ingest(req: schemas.IngestRequest) -> schemas.IngestResponse:
    """Edge list (or an earlier CSR file) to a degree-relabeled CSR file."""
    try:
        raw = load_csr(req.edges) if not req.labels else None
    except (GraphFormatError, ValueError):
        raw = None
    except OSError as exc:
        raise ServiceError(str(exc), 404) from None
    if raw is None:
        try:
            text = Path(req.edges).read_text()
            labels = Path(req.labels).read_text() if req.labels else None
        except OSError as exc:
            raise ServiceError(str(exc), 404) from None
        except UnicodeDecodeError:
            raise ServiceError(f"{req.edges} is neither an edge list nor a CSR file") from None
        try:
            raw = load_edge_list(text, labels)
        except GraphFormatError as exc:
            raise ServiceError(str(exc)) from None
    g, _ = relabel_by_degree(raw)
    Path(req.output).parent.mkdir(parents=True, exist_ok=True)
    save_csr(g, req.output)
    return schemas.IngestResponse(path=req.output, num_vertices=g.num_vertices, num_edges=g.num_edges,
                                  has_labels=g.has_labels)


def partition(req: schemas.PartitionRequest) -> schemas.PartitionResponse:
    g = load_graph(req.graph)
    parts = make_partitions(g, req.workers, req.mode, req.seed)
    files = [str(p) for p in dump_partitions(parts, req.output_dir)] if req.output_dir else []
    sizes = [schemas.PartitionSizeModel(worker_id=s.worker_id, owned_entries=s.owned_entries, extra_edges=s.extra_edges)
             for s in partition_sizes(parts)]
    return schemas.PartitionResponse(mode=parts[0].mode, workers=req.workers, sizes=sizes, files=files)


def plan(req: schemas.PlanRequest) -> schemas.PlanResponse:
    g = load_graph(req.graph)
    q = load_query(req.query)
    cfg = _config(req.flags)
    try:
        chosen = make_plan(q, cfg, CostModel.from_graph(g, cfg.cost_mode), req.workers)
    except ConfigError as exc:
        raise ServiceError(str(exc)) from None
    return schemas.PlanResponse(strategy=cfg.strategy, opts=cfg.opts, text=plan_text(chosen), plan=plan_to_dict(chosen))


def run(req: schemas.RunRequest) -> schemas.RunResponse:
    g = load_graph(req.graph)
    q = load_query(req.query)
    cfg = _config(req.flags, "enumerate" if req.enumerate else "count")
    parts = None
    if req.partitions and cfg.strategy != "fullrep":
        parts = restore_partitions(req.partitions, g.label_list)
    try:
        res = run_strategy(
            q, g, cfg,
            num_workers=req.workers,
            deployment=req.deployment,
            time_limit=req.time_limit,
            mem_limit=req.mem_limit,
            partitions=parts,
            plan=plan_from_dict(req.plan, cfg.strategy) if req.plan is not None else None,
        )
    except ConfigError as exc:
        raise ServiceError(str(exc)) from None
    except TimeLimitExceeded as exc:
        row = failed_row(q.name, cfg.strategy, cfg.opts, OT)
        return schemas.RunResponse(status=OT, metrics=row, csv=csv_text([row]), message=str(exc).splitlines()[0])
    except MemoryLimitExceeded as exc:
        row = failed_row(q.name, cfg.strategy, cfg.opts, OOM)
        return schemas.RunResponse(status=OOM, metrics=row, csv=csv_text([row]), message=str(exc).splitlines()[0])
    if req.plan_dump:
        Path(req.plan_dump).write_text(json.dumps(plan_to_dict(res.plan), indent=2) + "\n")
    row = res.metrics()
    return schemas.RunResponse(
        status="ok",
        metrics=row,
        csv=csv_text([row]),
        total_sent_integers=res.total_sent_integers,
        total_recv_integers=res.total_recv_integers,
        matches=[list(m) for m in res.matches] if res.matches is not None else None,
    )


def verify_corpus(req: schemas.VerifyRequest) -> schemas.VerifyResponse:
    if req.graph:
        graphs = [(Path(req.graph).name, load_graph(req.graph))]
    else:
        graphs = seeded_graphs(req.trials, req.n, req.p, req.seed)
    queries = {name: load_query(name) for name in (req.queries or CORPUS_NAMES)}
    kwargs = {} if req.strategies is None else {"strategies": tuple(req.strategies)}
    report = verify(graphs, queries, num_workers=req.workers, corrupt=req.corrupt, **kwargs)
    rows = [schemas.VerifyRowModel(**r.__dict__) for r in report.rows]
    return schemas.VerifyResponse(ok=report.ok, summary=report.summary(), rows=rows)


def graph_stats(req: schemas.StatsRequest) -> schemas.StatsResponse:
    st = stats(load_graph(req.graph))
    return schemas.StatsResponse(**st.__dict__)


def _config(flags: schemas.StrategyFlags, output: str = "count"):
    try:
        return flags.to_config(output)
    except ConfigError as exc:
        raise ServiceError(str(exc)) from None
