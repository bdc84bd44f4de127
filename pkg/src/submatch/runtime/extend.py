"""One WOptJoin level: Count, Propose, Intersect.

Prefixes travel between workers. Count visits the owner of every intersection
group's anchor to learn the anchor degree, Propose moves the prefix to the
owner of the cheapest anchor and materializes that group's candidate list,
and Intersect carries the list through the remaining groups. A group is an
anchor ``v_x`` plus query neighbors ``v_y`` whose adjacency to ``f(v_x)``'s
neighbors is resolvable in the anchor owner's triangle overlay; without
TrIndexing every group is a single source.

Every worker runs the same fixed number of stages per level, so the stages
line up across the cluster without extra coordination.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Optional, Sequence

from ..constraints import MatchConstraints
from .cluster import ExecutionError, WorkerCtx
from .records import Row


@dataclass(frozen=True)
class LevelPlan:
    """Positions refer to the prefix row, which is aligned to ``prefix_vars``."""

    vertex: int
    prefix_vars: tuple[int, ...]
    groups: tuple[tuple[int, tuple[int, ...]], ...]  # (anchor position, member positions)
    compressed: bool = False

    @classmethod
    def build(cls, prefix_vars: Sequence[int], vertex: int, groups, compressed: bool) -> "LevelPlan":
        pos = {v: i for i, v in enumerate(prefix_vars)}
        g = tuple((pos[a], tuple(pos[m] for m in members)) for a, members in groups)
        return cls(vertex, tuple(prefix_vars), g, compressed)


def _owned_anchor(ctx: WorkerCtx, u: int) -> tuple[int, ...]:
    nbrs = ctx.partition.owned.get(u)
    if nbrs is None:
        raise ExecutionError(f"worker {ctx.worker_id} asked for vertex {u} it does not own")
    return nbrs


def _sets_of(ctx: WorkerCtx, p: Row, positions) -> list[frozenset[int]]:
    nset = ctx.partition.neighbor_set
    return [nset(p[m]) for m in positions]


def _filter(cands, sets: list[frozenset[int]]) -> list[int]:
    if not sets:
        return list(cands)
    if len(sets) == 1:
        s0 = sets[0]
        return [c for c in cands if c in s0]
    return [c for c in cands if all(c in s for s in sets)]


class _Admission:
    """Injectivity, label and order filter for the new vertex of a level."""

    def __init__(self, lp: LevelPlan, constraints: Optional[MatchConstraints], labels):
        pos = {v: i for i, v in enumerate(lp.prefix_vars)}
        v = lp.vertex
        self.below = tuple(pos[x] for x in constraints.below[v] if x in pos) if constraints else ()
        self.above = tuple(pos[x] for x in constraints.above[v] if x in pos) if constraints else ()
        want = None
        if constraints is not None and constraints.labels is not None:
            want = constraints.labels[v]
        self.want = want
        self.labels = labels

    def window(self, p: Row, base: Sequence[int]) -> Sequence[int]:
        """The slice of the sorted list ``base`` allowed by the order."""
        lo, hi = -1, None
        for i in self.below:
            x = p[i]
            if type(x) is int and x > lo:
                lo = x
        for i in self.above:
            x = p[i]
            if type(x) is int and (hi is None or x < hi):
                hi = x
        if lo < 0 and hi is None:
            return base
        a = bisect_right(base, lo) if lo >= 0 else 0
        b = bisect_left(base, hi) if hi is not None else len(base)
        return base[a:b]

    def finish(self, p: Row, cands: list[int]) -> list[int]:
        used = [x for x in p if type(x) is int and x in cands]
        if used:
            cands = [c for c in cands if c not in used]
        if self.want is not None:
            labels, want = self.labels, self.want
            cands = [c for c in cands if labels is not None and labels[c] == want]
        return cands


def count_propose_intersect(
    ctx: WorkerCtx,
    prefixes: list[Row],
    lp: LevelPlan,
    constraints: Optional[MatchConstraints] = None,
) -> list[Row]:
    """Extend every prefix by the candidates of ``lp.vertex``; returns the
    extended rows that end up on this worker."""
    owner = ctx.partition.owner
    if getattr(owner, "seed", 0) is None:
        w = owner.num_workers
        owner = w.__rmod__  # u % w without a Python-level call
    admit = _Admission(lp, constraints, ctx.partition.labels)
    groups = lp.groups
    k = len(groups)
    if k == 0:
        raise ExecutionError("level without intersection sources")

    # Count: visit each anchor owner, remembering the smallest degree
    if k == 1:
        items = [(p, 0) for p in prefixes]
    else:
        items = [(p, -1, -1) for p in prefixes]
        for j, (a, _) in enumerate(groups):
            out: dict[int, list] = {}
            for it in items:
                out.setdefault(owner(it[0][a]), []).append(it)
            items = []
            received = ctx.exchange(out)
            with ctx.compute():
                for batch in received:
                    for p, best_cnt, best_g in batch:
                        d = len(_owned_anchor(ctx, p[a]))
                        if best_g < 0 or d < best_cnt:
                            best_cnt, best_g = d, j
                        items.append((p, best_cnt, best_g))
        items = [(p, g) for p, _, g in items]

    # Propose: move to the chosen anchor's owner and attach its candidate list
    out = {}
    for p, g in items:
        out.setdefault(owner(p[groups[g][0]]), []).append((p, g))
    carried = []
    received = ctx.exchange(out)
    with ctx.compute():
        n = 0
        for batch in received:
            for p, g in batch:
                a, members = groups[g]
                base = admit.window(p, _owned_anchor(ctx, p[a]))
                cands = admit.finish(p, _filter(base, _sets_of(ctx, p, members)))
                if cands:
                    carried.append((p, g, cands))
                n += 1
                if not n & 1023:
                    ctx.check()

    # Intersect: the remaining groups in plan order
    for step in range(k - 1):
        out = {}
        for p, g, cands in carried:
            nxt = step if step < g else step + 1
            out.setdefault(owner(p[groups[nxt][0]]), []).append((p, g, tuple(cands)))
        carried = []
        received = ctx.exchange(out)
        with ctx.compute():
            n = 0
            for batch in received:
                for p, g, cands in batch:
                    nxt = step if step < g else step + 1
                    a, members = groups[nxt]
                    _owned_anchor(ctx, p[a])
                    kept = _filter(cands, _sets_of(ctx, p, (a,) + members))
                    if kept:
                        carried.append((p, g, kept))
                    n += 1
                    if not n & 1023:
                        ctx.check()

    result: list[Row] = []
    with ctx.compute():
        if lp.compressed:
            result = [p + (tuple(cands),) for p, _, cands in carried]
        else:
            for p, _, cands in carried:
                result.extend([p + (c,) for c in cands])
    return result
