"""SPMD worker cluster with ordered all-to-all channels.

Every worker runs the same program over its own partition. Communication is
staged: in each :meth:`WorkerCtx.exchange` call a worker sends exactly one
(possibly empty) batch to every peer and blocks until it has one batch from
every peer for that stage. Batches to oneself are delivered locally and are
not counted as communication.

Two deployments share this contract: ``threads`` (queue.Queue channels in one
process) and ``processes`` (multiprocessing queues, one OS process per worker).
"""
from __future__ import annotations

import multiprocessing as mp
import queue
import resource
import sys
import threading
import time
import traceback
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence

DEPLOYMENTS = ("threads", "processes")
_POLL = 0.05


class ExecutionError(RuntimeError):
    """A worker failed; carries the first worker traceback."""


class TimeLimitExceeded(ExecutionError):
    pass


class MemoryLimitExceeded(ExecutionError):
    pass


class _Aborted(Exception):
    pass


def width(item: Any) -> int:
    """Number of integers in a (possibly nested) tuple payload."""
    if type(item) is int:
        return 1
    n = 0
    for x in item:
        n += 1 if type(x) is int else width(x)
    return n


def peak_rss_bytes() -> int:
    r = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    return r if sys.platform == "darwin" else r * 1024


@dataclass
class Counters:
    recv_integers: int = 0
    sent_integers: int = 0
    recv_batches: int = 0
    comp_time: float = 0.0
    total_time: float = 0.0
    peak_mem: int = 0
    peak_buffered_tuples: int = 0
    stats: dict[str, Any] = field(default_factory=dict)

    @property
    def comm_time(self) -> float:
        return max(self.total_time - self.comp_time, 0.0)

    def note_buffered(self, n: int) -> None:
        if n > self.peak_buffered_tuples:
            self.peak_buffered_tuples = n


class _Transport:
    def put(self, dest: int, msg) -> None:
        raise NotImplementedError

    def get(self, timeout: float):
        raise NotImplementedError

    def aborted(self) -> bool:
        raise NotImplementedError

    def abort(self) -> None:
        raise NotImplementedError


class _ThreadTransport(_Transport):
    def __init__(self, me: int, inboxes: Sequence[queue.Queue], flag: threading.Event):
        self.me, self.inboxes, self.flag = me, inboxes, flag

    def put(self, dest, msg):
        self.inboxes[dest].put(msg)

    def get(self, timeout):
        return self.inboxes[self.me].get(timeout=timeout)

    def aborted(self):
        return self.flag.is_set()

    def abort(self):
        self.flag.set()


class _ProcessTransport(_ThreadTransport):
    pass


class WorkerCtx:
    def __init__(
        self,
        worker_id: int,
        num_workers: int,
        partition: Any,
        transport: _Transport,
        deadline: Optional[float] = None,
        mem_limit: Optional[int] = None,
    ):
        self.worker_id = worker_id
        self.num_workers = num_workers
        self.partition = partition
        self.counters = Counters()
        self._transport = transport
        self._deadline = deadline
        self._mem_limit = mem_limit
        self._stage = 0
        self._stash: dict[int, list] = {}
        self._ticks = 0

    # -------------------------------------------------------------- control
    def check(self) -> None:
        if self._transport.aborted():
            raise _Aborted()
        if self._deadline is not None and time.perf_counter() > self._deadline:
            raise TimeLimitExceeded(f"worker {self.worker_id}: time limit exceeded")
        if self._mem_limit is not None and peak_rss_bytes() > self._mem_limit:
            raise MemoryLimitExceeded(f"worker {self.worker_id}: memory limit exceeded")

    def tick(self, every: int = 4096) -> None:
        """Cheap periodic check for long local loops."""
        self._ticks += 1
        if self._ticks % every == 0:
            self.check()

    @contextmanager
    def compute(self):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.counters.comp_time += time.perf_counter() - t0

    # -------------------------------------------------------------- channels
    def exchange(self, outgoing: dict[int, list]) -> list[list]:
        """One all-to-all stage. Returns the received batches ordered by sender."""
        self.check()
        stage = self._stage
        self._stage += 1
        me = self.worker_id
        received: dict[int, list] = {me: outgoing.get(me, [])}
        for dest in range(self.num_workers):
            if dest == me:
                continue
            batch = outgoing.get(dest, [])
            n = sum(width(t) for t in batch)
            self.counters.sent_integers += n
            self._transport.put(dest, (stage, me, batch, n))
        for msg in self._stash.pop(stage, []):
            self._accept(msg, received)
        while len(received) < self.num_workers:
            try:
                msg = self._transport.get(_POLL)
            except queue.Empty:
                self.check()
                continue
            if msg[0] == stage:
                self._accept(msg, received)
            else:
                self._stash.setdefault(msg[0], []).append(msg)
        return [received[k] for k in range(self.num_workers)]

    def _accept(self, msg, received: dict[int, list]) -> None:
        _, sender, batch, n = msg
        received[sender] = batch
        self.counters.recv_integers += n
        self.counters.recv_batches += 1

    def shuffle(self, items: Iterable, key_fn: Callable[[Any], int]) -> list:
        """Deliver each item to worker ``key_fn(item) mod w`` exactly once."""
        out: dict[int, list] = {}
        w = self.num_workers
        for t in items:
            out.setdefault(key_fn(t) % w, []).append(t)
        return [t for batch in self.exchange(out) for t in batch]

    def barrier(self) -> None:
        self.exchange({})


@dataclass
class ClusterResult:
    values: list[Any]
    counters: list[Counters]

    @property
    def time(self) -> float:
        return max((c.total_time for c in self.counters), default=0.0)

    def slowest(self) -> Counters:
        return max(self.counters, key=lambda c: c.total_time)


Program = Callable[[WorkerCtx, Any], Any]


def _run_one(wid, w, program, partition, payload, transport, deadline, mem_limit):
    ctx = WorkerCtx(wid, w, partition, transport, deadline, mem_limit)
    t0 = time.perf_counter()
    try:
        value = program(ctx, payload)
    finally:
        ctx.counters.total_time = time.perf_counter() - t0
        ctx.counters.peak_mem = peak_rss_bytes()
    return value, ctx.counters


def _classify(errors: list[tuple[int, BaseException, str]]) -> ExecutionError:
    for kind in (TimeLimitExceeded, MemoryLimitExceeded):
        for _, exc, _ in errors:
            if isinstance(exc, kind):
                return kind(str(exc))
    real = [e for e in errors if not isinstance(e[1], _Aborted)] or errors
    wid, exc, tb = real[0]
    err = ExecutionError(f"worker {wid} failed: {exc!r}\n{tb}")
    err.__cause__ = exc
    return err


def run_cluster(
    program: Program,
    partitions: Sequence[Any],
    payload: Any = None,
    deployment: str = "threads",
    time_limit: Optional[float] = None,
    mem_limit: Optional[int] = None,
) -> ClusterResult:
    """Run ``program(ctx, payload)`` on ``len(partitions)`` workers."""
    w = len(partitions)
    if w < 1:
        raise ValueError("need at least one worker")
    if deployment not in DEPLOYMENTS:
        raise ValueError(f"unknown deployment {deployment!r}")
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    if deployment == "processes" and w > 1:
        return _run_processes(program, partitions, payload, deadline, mem_limit)

    inboxes = [queue.Queue() for _ in range(w)]
    flag = threading.Event()
    values: list[Any] = [None] * w
    counters: list[Counters] = [Counters() for _ in range(w)]
    errors: list[tuple[int, BaseException, str]] = []

    def body(k: int) -> None:
        try:
            values[k], counters[k] = _run_one(
                k, w, program, partitions[k], payload, _ThreadTransport(k, inboxes, flag), deadline, mem_limit
            )
        except BaseException as exc:  # noqa: BLE001 - reported to the driver
            errors.append((k, exc, traceback.format_exc()))
            flag.set()

    if w == 1:
        body(0)
    else:
        threads = [threading.Thread(target=body, args=(k,), daemon=True) for k in range(w)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if errors:
        raise _classify(errors)
    _check_overrun(deadline)
    return ClusterResult(values, counters)


def _check_overrun(deadline: Optional[float]) -> None:
    # a run that finished between two checks still counts as over time
    if deadline is not None and time.perf_counter() > deadline:
        raise TimeLimitExceeded("time limit exceeded")


def _process_main(k, w, program, partition, payload, inboxes, flag, results, deadline_left, mem_limit):
    deadline = None if deadline_left is None else time.perf_counter() + deadline_left
    try:
        value, counters = _run_one(k, w, program, partition, payload, _ProcessTransport(k, inboxes, flag), deadline, mem_limit)
        results.put((k, True, value, counters))
    except BaseException as exc:  # noqa: BLE001
        flag.set()
        results.put((k, False, (type(exc).__name__, str(exc), traceback.format_exc()), None))


_EXC_TYPES = {"TimeLimitExceeded": TimeLimitExceeded, "MemoryLimitExceeded": MemoryLimitExceeded, "_Aborted": _Aborted}


def _run_processes(program, partitions, payload, deadline, mem_limit) -> ClusterResult:
    ctx = mp.get_context("fork")
    w = len(partitions)
    inboxes = [ctx.Queue() for _ in range(w)]
    flag = ctx.Event()
    results = ctx.Queue()
    left = None if deadline is None else max(deadline - time.perf_counter(), 0.0)
    procs = [
        ctx.Process(
            target=_process_main,
            args=(k, w, program, partitions[k], payload, inboxes, flag, results, left, mem_limit),
            daemon=True,
        )
        for k in range(w)
    ]
    for p in procs:
        p.start()
    values: list[Any] = [None] * w
    counters: list[Counters] = [Counters() for _ in range(w)]
    errors = []
    got = 0
    while got < w:
        try:
            k, ok, value, cnt = results.get(timeout=_POLL)
        except queue.Empty:
            if any(p.exitcode not in (None, 0) for p in procs):
                flag.set()
                dead = [i for i, p in enumerate(procs) if p.exitcode not in (None, 0)]
                for p in procs:
                    p.join(timeout=1.0)
                    if p.is_alive():
                        p.terminate()
                raise ExecutionError(f"worker process(es) {dead} died")
            continue
        got += 1
        if ok:
            values[k], counters[k] = value, cnt
        else:
            name, msg, tb = value
            errors.append((k, _EXC_TYPES.get(name, RuntimeError)(msg), tb))
    for p in procs:
        p.join()
    if errors:
        raise _classify(errors)
    _check_overrun(deadline)
    return ClusterResult(values, counters)
