"""Command line client.

Every subcommand builds a request model and hands it to the in-process
handlers, or to a running service when ``--server URL`` is given.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from typing import Optional, Sequence

from pydantic import BaseModel

from .partition import normalize_mode
from .runtime.cluster import ExecutionError
from .service import handlers, schemas

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_OT, EXIT_OOM, EXIT_FAIL = 0, 1, 2, 3, 4, 5

_DURATION = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*(ms|s|m|h)?\s*$")
_SIZE = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*([kKmMgGtT]?)[bB]?\s*$")


def parse_duration(text: str) -> float:
    """Seconds from ``"30"``, ``"1ms"``, ``"2.5s"``, ``"5m"`` or ``"1h"``."""
    m = _DURATION.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}")
    scale = {"ms": 1e-3, "s": 1.0, "m": 60.0, "h": 3600.0}[m.group(2) or "s"]
    return float(m.group(1)) * scale


def parse_size(text: str) -> int:
    """Bytes from ``"1048576"``, ``"512M"`` or ``"2G"``."""
    m = _SIZE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"bad size {text!r}")
    scale = 1024 ** ("KMGT".find(m.group(2).upper()) + 1) if m.group(2) else 1
    return int(float(m.group(1)) * scale)


def _add_strategy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=["binjoin", "woptjoin", "shrcube", "fullrep"], default="woptjoin")
    p.add_argument("--batching", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--trindexing", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--compression", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--batch-size", type=int, default=1_000_000)
    p.add_argument("--ordered-partition", action="store_true",
                   help="keep each triangle's closing edge once (with --trindexing)")
    p.add_argument("--order", dest="order_mode", choices=["auto", "greedy", "crystal"], default="auto",
                   help="WOptJoin matching order")


def _mode(text: str) -> str:
    try:
        return normalize_mode(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _flags(args) -> schemas.StrategyFlags:
    mode = getattr(args, "mode", None)
    trindexing = args.trindexing or mode in ("triangle", "triangle_ordered")
    ordered = args.ordered_partition or mode == "triangle_ordered"
    return schemas.StrategyFlags(
        strategy=args.strategy, batching=args.batching, trindexing=trindexing,
        compression=args.compression, batch_size=args.batch_size,
        ordered_partition=ordered, order_mode=args.order_mode,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="submatch", description="Distributed subgraph matching engine")
    parser.add_argument("--server", metavar="URL", help="send the command to a running service")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="edge list to binary CSR")
    p.add_argument("edges")
    p.add_argument("output")
    p.add_argument("--labels", help="file of 'vertex label' lines")

    p = sub.add_parser("partition", help="build (and optionally dump) worker partitions")
    p.add_argument("graph")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--partition", dest="mode", type=_mode, default="hash", help="hash, tri or tri-ordered")
    p.add_argument("--output", dest="output_dir", help="directory for per-worker partition files")
    p.add_argument("--seed", type=int, help="use a seeded vertex hash instead of u mod w")

    p = sub.add_parser("plan", help="print the execution plan")
    p.add_argument("graph")
    p.add_argument("query", help="corpus name or query file")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--json", action="store_true", help="print the plan as JSON")
    _add_strategy_flags(p)

    p = sub.add_parser("run", help="execute a query and print a metrics CSV line")
    p.add_argument("graph")
    p.add_argument("query", help="corpus name or query file")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--deployment", choices=["threads", "processes"], default="threads")
    p.add_argument("--partition", dest="mode", type=_mode,
                   help="hash, tri or tri-ordered; the triangle modes turn on --trindexing")
    p.add_argument("--partitions", metavar="DIR", help="use partitions dumped by the partition subcommand")
    p.add_argument("--time-limit", type=parse_duration, help="e.g. 30, 500ms, 5m")
    p.add_argument("--mem-limit", type=parse_size, help="peak resident memory, e.g. 512M, 4G")
    p.add_argument("--output", metavar="PATH", help="enumerate matches and write them here, one per line")
    p.add_argument("--csv", metavar="PATH", help="append the metrics line to this CSV file")
    p.add_argument("--plan-dump", metavar="PATH", help="write the executed plan as JSON")
    p.add_argument("--plan", metavar="PATH", help="replay a plan written by --plan-dump")
    _add_strategy_flags(p)

    p = sub.add_parser("verify", help="compare every strategy and flag combination with the oracle")
    p.add_argument("--graph", help="verify on this graph instead of seeded random graphs")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--p", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=int, default=3)
    p.add_argument("--query", action="append", dest="queries", help="restrict to these queries (repeatable)")
    p.add_argument("--strategy", action="append", dest="strategies",
                   choices=["binjoin", "woptjoin", "shrcube", "fullrep"], help="restrict strategies (repeatable)")
    p.add_argument("--corrupt-plan", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("stats", help="graph summary")
    p.add_argument("graph")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


class _Remote:
    def __init__(self, url: str):
        import httpx

        self.client = httpx.Client(base_url=url.rstrip("/"), timeout=None)

    def call(self, path: str, req: BaseModel, model: type[BaseModel]) -> BaseModel:
        r = self.client.post(path, json=req.model_dump())
        if r.status_code != 200:
            try:
                detail = r.json().get("detail")
            except ValueError:
                detail = r.text
            raise handlers.ServiceError(str(detail), r.status_code)
        return model.model_validate(r.json())


def _dispatch(server: Optional[str], path: str, req: BaseModel, local, model: type[BaseModel]):
    if server:
        return _Remote(server).call(path, req, model)
    return local(req)


def _read_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, ValueError) as exc:
        raise handlers.ServiceError(f"cannot read {path}: {exc}") from None


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _main(args)
    except handlers.ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if exc.status_code in (400, 404, 422) else EXIT_ERROR
    except ExecutionError as exc:
        print(f"error: {str(exc).splitlines()[0]}", file=sys.stderr)
        return EXIT_ERROR


def _main(args) -> int:
    cmd, server = args.command, args.server
    if cmd == "serve":
        import uvicorn

        uvicorn.run("submatch.service.app:app", host=args.host, port=args.port)
        return EXIT_OK

    if cmd == "ingest":
        req = schemas.IngestRequest(edges=args.edges, labels=args.labels, output=args.output)
        res = _dispatch(server, "/ingest", req, handlers.ingest, schemas.IngestResponse)
        print(f"{res.path}: N={res.num_vertices} M={res.num_edges} labels={'yes' if res.has_labels else 'no'}")
        return EXIT_OK

    if cmd == "partition":
        req = schemas.PartitionRequest(graph=args.graph, workers=args.workers, mode=args.mode,
                                       output_dir=args.output_dir, seed=args.seed)
        res = _dispatch(server, "/partition", req, handlers.partition, schemas.PartitionResponse)
        print(f"mode={res.mode} workers={res.workers}")
        print("worker,owned_entries,extra_edges")
        for s in res.sizes:
            print(f"{s.worker_id},{s.owned_entries},{s.extra_edges}")
        for f in res.files:
            print(f"wrote {f}")
        return EXIT_OK

    if cmd == "plan":
        req = schemas.PlanRequest(graph=args.graph, query=args.query, flags=_flags(args), workers=args.workers)
        res = _dispatch(server, "/plan", req, handlers.plan, schemas.PlanResponse)
        if args.json:
            print(json.dumps(res.plan, indent=2))
        else:
            print(res.text)
        return EXIT_OK

    if cmd == "run":
        req = schemas.RunRequest(
            graph=args.graph, query=args.query, flags=_flags(args), workers=args.workers,
            deployment=args.deployment, time_limit=args.time_limit, mem_limit=args.mem_limit,
            enumerate=args.output is not None, partitions=args.partitions, plan_dump=args.plan_dump,
            plan=_read_json(args.plan) if args.plan else None,
        )
        res = _dispatch(server, "/run", req, handlers.run, schemas.RunResponse)
        sys.stdout.write(res.csv)
        if args.csv:
            fresh = not os.path.exists(args.csv) or os.path.getsize(args.csv) == 0
            with open(args.csv, "a") as f:
                f.write(res.csv if fresh else res.csv.split("\n", 1)[1])
        if res.status != "ok":
            print(f"{res.status}: {res.message}", file=sys.stderr)
            return EXIT_OT if res.status == "OT" else EXIT_OOM
        if args.output is not None and res.matches is not None:
            with open(args.output, "w") as f:
                for m in res.matches:
                    f.write(" ".join(map(str, m)) + "\n")
        return EXIT_OK

    if cmd == "verify":
        req = schemas.VerifyRequest(
            graph=args.graph, trials=args.trials, n=args.n, p=args.p, seed=args.seed, workers=args.workers,
            queries=args.queries, strategies=args.strategies, corrupt=args.corrupt_plan,
        )
        res = _dispatch(server, "/verify", req, handlers.verify_corpus, schemas.VerifyResponse)
        print(res.summary)
        return EXIT_OK if res.ok else EXIT_FAIL

    if cmd == "stats":
        req = schemas.StatsRequest(graph=args.graph)
        res = _dispatch(server, "/stats", req, handlers.graph_stats, schemas.StatsResponse)
        print(f"N={res.num_vertices} M={res.num_edges} avg_degree={res.avg_degree:.3f} max_degree={res.max_degree}")
        for lab, cnt in sorted(res.label_frequencies.items()):
            print(f"label {lab}: {cnt}")
        return EXIT_OK
    raise AssertionError(cmd)


if __name__ == "__main__":
    sys.exit(main())
