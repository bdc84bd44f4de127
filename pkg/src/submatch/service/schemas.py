"""Request and response models shared by the HTTP service and the CLI."""
from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from ..strategies import StrategyConfig

Strategy = Literal["binjoin", "woptjoin", "shrcube", "fullrep"]
Deployment = Literal["threads", "processes"]
PartitionMode = Literal["hash", "triangle", "triangle_ordered"]


class StrategyFlags(BaseModel):
    strategy: Strategy = "woptjoin"
    batching: bool = False
    trindexing: bool = False
    compression: bool = False
    batch_size: int = Field(1_000_000, ge=1)
    ordered_partition: bool = False
    order_mode: Literal["auto", "greedy", "crystal"] = "auto"
    cost_mode: Literal["er", "degree_stats"] = "er"

    def to_config(self, output: str = "count") -> StrategyConfig:
        return StrategyConfig(
            strategy=self.strategy,
            batching=self.batching,
            trindexing=self.trindexing,
            compression=self.compression,
            batch_size=self.batch_size,
            output=output,
            order_mode=self.order_mode,
            cost_mode=self.cost_mode,
            ordered_partition=self.ordered_partition,
        )


class IngestRequest(BaseModel):
    edges: str = Field(..., description="path of a whitespace separated edge list")
    labels: Optional[str] = Field(None, description="path of 'vertex label' lines")
    output: str = Field(..., description="where to write the binary CSR file")


class IngestResponse(BaseModel):
    path: str
    num_vertices: int
    num_edges: int
    has_labels: bool


class PartitionRequest(BaseModel):
    graph: str
    workers: int = Field(1, ge=1)
    mode: PartitionMode = "hash"
    output_dir: Optional[str] = None
    seed: Optional[int] = None


class PartitionSizeModel(BaseModel):
    worker_id: int
    owned_entries: int
    extra_edges: int


class PartitionResponse(BaseModel):
    mode: str
    workers: int
    sizes: list[PartitionSizeModel]
    files: list[str] = []


class PlanRequest(BaseModel):
    graph: str
    query: str = Field(..., description="corpus query name or path of a query file")
    flags: StrategyFlags = StrategyFlags()
    workers: int = Field(1, ge=1)


class PlanResponse(BaseModel):
    strategy: str
    opts: str
    text: str
    plan: dict[str, Any]


class RunRequest(BaseModel):
    graph: str
    query: str
    flags: StrategyFlags = StrategyFlags()
    workers: int = Field(1, ge=1)
    deployment: Deployment = "threads"
    time_limit: Optional[float] = Field(None, gt=0, description="seconds")
    mem_limit: Optional[int] = Field(None, gt=0, description="bytes of peak resident memory")
    enumerate: bool = False
    partitions: Optional[str] = Field(None, description="directory written by the partition step")
    plan: Optional[dict[str, Any]] = Field(None, description="a plan previously written by plan_dump")
    plan_dump: Optional[str] = Field(None, description="write the executed plan as JSON here")


class RunResponse(BaseModel):
    status: Literal["ok", "OT", "OOM"]
    metrics: dict[str, Any]
    csv: str
    total_sent_integers: int = 0
    total_recv_integers: int = 0
    matches: Optional[list[list[int]]] = None
    message: str = ""


class VerifyRequest(BaseModel):
    graph: Optional[str] = None
    trials: int = Field(1, ge=0)
    n: int = Field(30, ge=1)
    p: float = Field(0.15, ge=0.0, le=1.0)
    seed: int = 42
    workers: int = Field(3, ge=1)
    queries: Optional[list[str]] = None
    strategies: Optional[list[Strategy]] = None
    corrupt: bool = False


class VerifyRowModel(BaseModel):
    graph: str
    query: str
    strategy: str
    opts: str
    expected: int
    got: int
    ok: bool
    diff: list[str] = []


class VerifyResponse(BaseModel):
    ok: bool
    summary: str
    rows: list[VerifyRowModel]


class StatsRequest(BaseModel):
    graph: str


class StatsResponse(BaseModel):
    num_vertices: int
    num_edges: int
    avg_degree: float
    max_degree: int
    label_frequencies: dict[int, int] = {}
