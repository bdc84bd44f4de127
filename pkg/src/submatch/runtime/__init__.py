from .batching import batch_driver, split_candidates
from .cluster import (
    ClusterResult,
    Counters,
    ExecutionError,
    MemoryLimitExceeded,
    TimeLimitExceeded,
    WorkerCtx,
    run_cluster,
    width,
)
from .extend import LevelPlan, count_propose_intersect
from .join import JoinConfig, JoinLayout, hash_join, nested_loop_join
from .records import Relation, decompress, materialize, row_width

__all__ = [
    "batch_driver", "split_candidates", "ClusterResult", "Counters", "ExecutionError",
    "MemoryLimitExceeded", "TimeLimitExceeded", "WorkerCtx", "run_cluster", "width",
    "LevelPlan", "count_propose_intersect", "JoinConfig", "JoinLayout", "hash_join",
    "nested_loop_join", "Relation", "decompress", "materialize", "row_width",
]
