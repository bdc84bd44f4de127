"""Distributed subgraph matching: BinJoin, WOptJoin, ShrCube and FullRep over
a worker/channel runtime."""
from .graph import DataGraph, load_edge_list, relabel_by_degree, stats
from .query import QueryGraph, corpus_query, parse_query
from .strategies import StrategyConfig, run_strategy

__version__ = "0.1.0"

__all__ = [
    "DataGraph", "load_edge_list", "relabel_by_degree", "stats",
    "QueryGraph", "corpus_query", "parse_query",
    "StrategyConfig", "run_strategy",
]
