"""Cross-check every strategy and flag combination against the oracle."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from .graph import DataGraph, random_graph
from .oracle import brute_force, compare
from .partition import make_partitions
from .planner import WOptOrder
from .query import QueryGraph, corpus
from .strategies import STRATEGIES, flag_combinations, run_strategy


def corrupt_plan(plan: Any) -> Any:
    """Test hook: drop one intersection source from the first WOptJoin level
    that has two, so the engine stops checking one query edge."""
    if not isinstance(plan, WOptOrder):
        return plan
    groups = list(plan.groups)
    for i, level in enumerate(groups):
        if len(level) >= 2:
            groups[i] = level[:-1]
            return dataclasses.replace(plan, groups=tuple(groups))
        for j, (anchor, members) in enumerate(level):
            if members:
                groups[i] = level[:j] + ((anchor, members[:-1]),) + level[j + 1:]
                return dataclasses.replace(plan, groups=tuple(groups))
    return plan


@dataclass
class VerifyRow:
    graph: str
    query: str
    strategy: str
    opts: str
    expected: int
    got: int
    ok: bool
    diff: list[str] = field(default_factory=list)


@dataclass
class VerifyReport:
    rows: list[VerifyRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def failures(self) -> list[VerifyRow]:
        return [r for r in self.rows if not r.ok]

    def summary(self) -> str:
        lines = [f"{'graph':<14} {'query':<14} {'strategy':<9} {'opts':<34} {'want':>8} {'got':>8}  result"]
        for r in self.rows:
            lines.append(
                f"{r.graph:<14} {r.query:<14} {r.strategy:<9} {r.opts:<34} {r.expected:>8} {r.got:>8}  "
                f"{'PASS' if r.ok else 'FAIL'}"
            )
            lines.extend("    " + d for d in r.diff)
        status = "PASS" if self.ok else "FAIL"
        lines.append(f"{status}: {len(self.rows) - len(self.failures)}/{len(self.rows)} runs agree with the oracle")
        return "\n".join(lines)


def seeded_graphs(trials: int, n: int, p: float, seed: int) -> list[tuple[str, DataGraph]]:
    return [(f"G({n},{p})#{seed + i}", random_graph(n, p, seed=seed + i)) for i in range(trials)]


def verify(
    graphs: Iterable[tuple[str, DataGraph]],
    queries: Optional[dict[str, QueryGraph]] = None,
    num_workers: int = 3,
    strategies: Sequence[str] = STRATEGIES,
    batch_size: int = 8,
    corrupt: bool = False,
) -> VerifyReport:
    """Run each query under each strategy and flag combination on every graph
    and compare the match sets with the oracle.

    ``batch_size`` is kept small so batching splits the work into several runs.
    """
    queries = corpus() if queries is None else queries
    report = VerifyReport()
    hook = corrupt_plan if corrupt else None
    for gname, g in graphs:
        parts = {mode: make_partitions(g, num_workers, mode) for mode in ("hash", "triangle")}
        for qname, q in queries.items():
            want = brute_force(q, g)
            for strategy in strategies:
                for base in flag_combinations(strategy):
                    cfg = dataclasses.replace(base, output="enumerate", batch_size=batch_size)
                    part = None if strategy == "fullrep" else parts[cfg.partition_mode]
                    res = run_strategy(q, g, cfg, num_workers=num_workers, partitions=part, plan_hook=hook)
                    diff = compare(want, res.matches or [])
                    report.rows.append(VerifyRow(
                        gname, qname, strategy, cfg.opts, want.count, res.count, diff.ok, diff.lines(),
                    ))
    return report

