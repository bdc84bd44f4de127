"""Natural hash join with Buffer-and-Batch spilling.

Each input side is buffered up to ``buffer_tuples`` rows. If either side
overflows, every buffer is sorted by ``(hash(key), key)`` and spilled as a run
of int64 records; the runs of each side are merged into one sorted file. The
join then takes batches of at most ``buffer_tuples`` left records (a contiguous
hash range), builds a table on them and streams the matching right hash range
past it. At most ``2 * buffer_tuples`` input rows are held in memory at once.
"""
from __future__ import annotations

import heapq
import os
import tempfile
from array import array
from operator import itemgetter
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Optional, Sequence

from ..constraints import MatchConstraints
from .cluster import Counters
from .records import Relation, Row

_HASH_MASK = (1 << 62) - 1
_READ_INTS = 1 << 14


@dataclass(frozen=True)
class JoinConfig:
    buffer_tuples: int = 1 << 20
    spill_dir: Optional[str] = None

    def __post_init__(self):
        if self.buffer_tuples < 1:
            raise ValueError("buffer_tuples must be >= 1")


class JoinLayout:
    """Column bookkeeping for joining two relations on their shared vertices."""

    def __init__(
        self,
        left_vars: Sequence[int],
        right_vars: Sequence[int],
        constraints: Optional[MatchConstraints] = None,
        packed: frozenset[int] = frozenset(),
    ):
        self.left_vars = tuple(left_vars)
        self.right_vars = tuple(right_vars)
        lpos = {v: i for i, v in enumerate(self.left_vars)}
        rpos = {v: i for i, v in enumerate(self.right_vars)}
        self.key_vars = tuple(sorted(set(lpos) & set(rpos)))
        if not self.key_vars:
            raise AssertionError("join sides share no vertex")
        self.out_vars = tuple(sorted(set(lpos) | set(rpos)))
        self.lkey = tuple(lpos[v] for v in self.key_vars)
        self.rkey = tuple(rpos[v] for v in self.key_vars)
        # (side, index) per output column; side 0 = left
        self.sources = tuple((0, lpos[v]) if v in lpos else (1, rpos[v]) for v in self.out_vars)
        self.lonly = tuple(lpos[v] for v in self.left_vars if v not in rpos)
        self.ronly = tuple(rpos[v] for v in self.right_vars if v not in lpos)
        cross = []
        if constraints is not None:
            for a, b in constraints.pairs():
                if a in lpos and b in rpos and a not in rpos and b not in lpos:
                    cross.append((lpos[a], rpos[b]))
                elif b in lpos and a in rpos and b not in rpos and a not in lpos:
                    cross.append((-1 - lpos[b], rpos[a]))
        self.cross = tuple(cross)
        # keys are compared only with each other, so a 1-column key may be a scalar
        self.left_key = itemgetter(*self.lkey)
        self.right_key = itemgetter(*self.rkey)
        self.concrete = False
        self.packed = frozenset(packed) & frozenset(self.out_vars)
        nl = len(self.left_vars)
        cat = [i if s == 0 else nl + i for s, i in self.sources]
        self._get = itemgetter(*cat) if len(cat) > 1 else (lambda r, i=cat[0]: (r[i],))
        loose = [self.left_vars[i] for i in self.lonly] + [self.right_vars[j] for j in self.ronly]
        if not self.packed & set(loose):
            uniq = list(self.lonly) + [nl + j for j in self.ronly]
            self._uniq = itemgetter(*uniq) if self.lonly and self.ronly else None
            self._n_uniq = len(uniq)
            self._cross_cat = tuple(
                (li, nl + rj) if li >= 0 else (nl + rj, -1 - li) for li, rj in self.cross
            )
            self.combine = self._combine_concrete
            self.concrete = True

    def _combine_concrete(self, lrow: Row, rrow: Row) -> Optional[Row]:
        cat = lrow + rrow
        if self._uniq is not None and len(set(self._uniq(cat))) != self._n_uniq:
            return None
        for a, b in self._cross_cat:
            if not cat[a] < cat[b]:
                return None
        return self._get(cat)

    def combine(self, lrow: Row, rrow: Row) -> Optional[Row]:
        lvals = [lrow[i] for i in self.lonly if type(lrow[i]) is int]
        if lvals:
            rset = {rrow[j] for j in self.ronly if type(rrow[j]) is int}
            for x in lvals:
                if x in rset:
                    return None
        for li, rj in self.cross:
            if li >= 0:
                a, b = lrow[li], rrow[rj]
            else:
                a, b = rrow[rj], lrow[-1 - li]
            if type(a) is int and type(b) is int and not a < b:
                return None
        sides = (lrow, rrow)
        return tuple(sides[s][i] for s, i in self.sources)


def key_hash(key: tuple) -> int:
    return hash(key) & _HASH_MASK


# ---------------------------------------------------------------- spill files

def _encode(h: int, row: Row, out: array) -> None:
    out.append(h)
    out.append(len(row))
    for x in row:
        if type(x) is tuple:
            out.append(-(len(x) + 1))
            out.extend(x)
        else:
            out.append(x)


class _Reader:
    """Sequential record reader over a spill file with record-level seek."""

    def __init__(self, path: str):
        self.path = path
        self.f = open(path, "rb")
        self.buf: list[int] = []
        self.i = 0
        self.base = 0  # int offset of buf[0] in the file

    def close(self) -> None:
        self.f.close()

    def _need(self, k: int) -> bool:
        while len(self.buf) - self.i < k:
            chunk = array("q")
            raw = self.f.read(8 * _READ_INTS)
            if not raw:
                return False
            chunk.frombytes(raw)
            self.base += self.i
            self.buf = self.buf[self.i:] + chunk.tolist()
            self.i = 0
        return True

    def tell(self) -> int:
        return self.base + self.i

    def seek(self, pos: int) -> None:
        self.f.seek(8 * pos)
        self.buf, self.i, self.base = [], 0, pos

    def next(self) -> Optional[tuple[int, int, Row]]:
        """``(position, hash, row)`` or ``None`` at end of file."""
        if not self._need(2):
            return None
        pos = self.tell()
        h, n = self.buf[self.i], self.buf[self.i + 1]
        self.i += 2
        row = []
        for _ in range(n):
            self._need(1)
            x = self.buf[self.i]
            self.i += 1
            if x < 0:
                k = -x - 1
                self._need(k)
                row.append(tuple(self.buf[self.i:self.i + k]))
                self.i += k
            else:
                row.append(x)
        return pos, h, tuple(row)

    def __iter__(self) -> Iterator[tuple[int, int, Row]]:
        while True:
            rec = self.next()
            if rec is None:
                return
            yield rec


class _Side:
    def __init__(self, keyf: Callable[[Row], tuple], cfg: JoinConfig, tmpdir: str, tag: str):
        self.keyf = keyf
        self.cfg = cfg
        self.tmpdir = tmpdir
        self.tag = tag
        self.buffer: list[Row] = []
        self.runs: list[str] = []

    def spill(self) -> None:
        if not self.buffer:
            return
        keyed = sorted(((key_hash(k), k, r) for r in self.buffer for k in (self.keyf(r),)), key=lambda t: (t[0], t[1]))
        out = array("q")
        for h, _, r in keyed:
            _encode(h, r, out)
        path = os.path.join(self.tmpdir, f"{self.tag}-run{len(self.runs)}.bin")
        with open(path, "wb") as f:
            out.tofile(f)
        self.runs.append(path)
        self.buffer = []

    def merged(self) -> str:
        """Merge all runs into one sorted file; returns its path."""
        path = os.path.join(self.tmpdir, f"{self.tag}-merged.bin")
        readers = [_Reader(p) for p in self.runs]
        try:
            streams = [((h, self.keyf(r), r) for _, h, r in rd) for rd in readers]
            out = array("q")
            with open(path, "wb") as f:
                for h, _, r in heapq.merge(*streams, key=lambda t: (t[0], t[1])):
                    _encode(h, r, out)
                    if len(out) >= _READ_INTS:
                        out.tofile(f)
                        out = array("q")
                out.tofile(f)
        finally:
            for rd in readers:
                rd.close()
        return path


def hash_join(
    left_vars: Sequence[int],
    left_rows: Iterable[Row],
    right_vars: Sequence[int],
    right_rows: Iterable[Row],
    constraints: Optional[MatchConstraints] = None,
    cfg: JoinConfig = JoinConfig(),
    counters: Optional[Counters] = None,
    tick: Optional[Callable[[], None]] = None,
    packed: frozenset[int] = frozenset(),
) -> Relation:
    """Join two row streams on their shared vertices.

    ``packed`` names vertices whose entries may be candidate arrays; the
    remaining columns take a faster all-concrete path.
    """
    layout = JoinLayout(left_vars, right_vars, constraints, packed)
    counters = counters if counters is not None else Counters()
    tick = tick or (lambda: None)
    limit = cfg.buffer_tuples
    tmpdir = tempfile.mkdtemp(prefix="submatch-join-", dir=cfg.spill_dir)
    try:
        left = _Side(layout.left_key, cfg, tmpdir, "L")
        right = _Side(layout.right_key, cfg, tmpdir, "R")
        for side, rows in ((left, left_rows), (right, right_rows)):
            for r in rows:
                side.buffer.append(r)
                counters.note_buffered(len(left.buffer) + len(right.buffer))
                if len(side.buffer) >= limit:
                    side.spill()
                tick()
        if not left.runs and not right.runs:
            out = _join_in_memory(layout, left.buffer, right.buffer, tick)
            return Relation(layout.out_vars, out, layout.packed)
        left.spill()
        right.spill()
        counters.stats["join_spills"] = counters.stats.get("join_spills", 0) + len(left.runs) + len(right.runs)
        if not left.runs or not right.runs:
            return Relation(layout.out_vars, [], layout.packed)
        out = _join_batched(layout, left.merged(), right.merged(), limit, counters, tick)
        return Relation(layout.out_vars, out, layout.packed)
    finally:
        for name in os.listdir(tmpdir):
            os.unlink(os.path.join(tmpdir, name))
        os.rmdir(tmpdir)


def _join_in_memory(layout: JoinLayout, lrows: list[Row], rrows: list[Row], tick) -> list[Row]:
    if len(rrows) < len(lrows):
        build, probe, build_key, probe_key, flip = rrows, lrows, layout.right_key, layout.left_key, True
    else:
        build, probe, build_key, probe_key, flip = lrows, rrows, layout.left_key, layout.right_key, False
    table: dict[tuple, list[Row]] = {}
    for r in build:
        table.setdefault(build_key(r), []).append(r)
    if layout.concrete:
        return _join_concrete(layout, table, probe, probe_key, flip, tick)
    out = []
    combine = layout.combine
    for p in probe:
        hits = table.get(probe_key(p))
        if not hits:
            continue
        for b in hits:
            row = combine(p, b) if flip else combine(b, p)
            if row is not None:
                out.append(row)
        tick()
    return out


def _join_concrete(layout: JoinLayout, table, probe, probe_key, flip: bool, tick) -> list[Row]:
    out: list[Row] = []
    append = out.append
    uniq, n_uniq, cross, get = layout._uniq, layout._n_uniq, layout._cross_cat, layout._get
    for p in probe:
        hits = table.get(probe_key(p))
        if not hits:
            continue
        for b in hits:
            cat = b + p if flip is False else p + b
            if uniq is not None and len(set(uniq(cat))) != n_uniq:
                continue
            for a, c in cross:
                if not cat[a] < cat[c]:
                    break
            else:
                append(get(cat))
        tick()
    return out


def _join_batched(layout: JoinLayout, lpath: str, rpath: str, limit: int, counters: Counters, tick) -> list[Row]:
    lr, rr = _Reader(lpath), _Reader(rpath)
    out: list[Row] = []
    mark = 0
    try:
        pending = lr.next()
        while pending is not None:
            batch: list[tuple[int, Row]] = []
            while pending is not None and len(batch) < limit:
                batch.append((pending[1], pending[2]))
                pending = lr.next()
            lo, hi = batch[0][0], batch[-1][0]
            table: dict[tuple, list[Row]] = {}
            for _, r in batch:
                table.setdefault(layout.left_key(r), []).append(r)
            rr.seek(mark)
            new_mark = None
            held = len(batch)
            while True:
                rec = rr.next()
                if rec is None:
                    break
                pos, h, row = rec
                if h >= hi and new_mark is None:
                    new_mark = pos
                if h > hi:
                    break
                if h < lo:
                    continue
                counters.note_buffered(held + 1)
                for lrow in table.get(layout.right_key(row), ()):
                    j = layout.combine(lrow, row)
                    if j is not None:
                        out.append(j)
                tick()
            if new_mark is not None:
                mark = new_mark
    finally:
        lr.close()
        rr.close()
    return out


def nested_loop_join(
    left_vars: Sequence[int], left_rows: Sequence[Row], right_vars: Sequence[int], right_rows: Sequence[Row],
    constraints: Optional[MatchConstraints] = None,
) -> Relation:
    """Reference join used to check :func:`hash_join`."""
    layout = JoinLayout(left_vars, right_vars, constraints)
    out = []
    for a in left_rows:
        for b in right_rows:
            if layout.left_key(a) == layout.right_key(b):
                j = JoinLayout.combine(layout, a, b)
                if j is not None:
                    out.append(j)
    return Relation(layout.out_vars, out, layout.packed)
