import dataclasses

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from submatch.graph import complete_graph, from_edges, random_graph
from submatch.matcher import GraphView, local_match
from submatch.constraints import MatchConstraints
from submatch.oracle import brute_force
from submatch.partition import make_partitions
from submatch.planner import CostModel, HypercubeShares
from submatch.query import PartialOrder, QueryGraph, corpus, corpus_query, subquery, symmetry_break_order
from submatch.strategies import (
    STRATEGIES,
    ConfigError,
    StrategyConfig,
    flag_combinations,
    make_plan,
    run_shrcube_cells,
    run_strategy,
)

ALL_CONFIGS = [c for s in STRATEGIES for c in flag_combinations(s)]


def _ids(cfgs):
    return [f"{c.strategy}-{c.opts}" for c in cfgs]


def _enum(cfg, **kw):
    return dataclasses.replace(cfg, output="enumerate", **kw)


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=_ids(ALL_CONFIGS))
def test_example_graph_all_configs(cfg, example_graph, diamond):
    res = run_strategy(diamond, example_graph, _enum(cfg, batch_size=2), num_workers=3)
    assert res.matches == [(0, 1, 5, 4), (1, 4, 2, 5), (3, 2, 5, 4)]


@pytest.mark.parametrize("cfg", ALL_CONFIGS, ids=_ids(ALL_CONFIGS))
def test_labelled_example_all_configs(cfg, labelled_example_graph, labelled_diamond):
    res = run_strategy(labelled_diamond, labelled_example_graph, _enum(cfg, batch_size=2), num_workers=2)
    assert res.matches == [(0, 1, 5, 4), (3, 2, 5, 4)]


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_triangle_on_k4(strategy):
    res = run_strategy(corpus_query("triangle"), complete_graph(4), StrategyConfig(strategy), num_workers=2)
    assert res.count == 4


def test_triangle_with_trindexing_needs_no_join():
    cfg = StrategyConfig("binjoin", trindexing=True)
    res = run_strategy(corpus_query("triangle"), random_graph(25, 0.3, seed=2), cfg, num_workers=3)
    assert res.plan.root.is_leaf
    assert res.total_recv_integers == 0
    assert res.count == brute_force(corpus_query("triangle"), random_graph(25, 0.3, seed=2)).count


def test_processes_deployment(example_graph, diamond):
    for strategy in STRATEGIES:
        res = run_strategy(diamond, example_graph, _enum(StrategyConfig(strategy)), num_workers=2, deployment="processes")
        assert res.count == 3


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    n=st.integers(6, 14),
    p=st.floats(0.15, 0.6),
    seed=st.integers(0, 10_000),
    name=st.sampled_from(sorted(corpus())),
    cfg=st.sampled_from(ALL_CONFIGS),
    w=st.integers(1, 4),
    labels=st.integers(0, 2),
)
def test_strategies_agree_with_oracle(n, p, seed, name, cfg, w, labels):
    g = random_graph(n, p, seed=seed, num_labels=labels)
    q = corpus_query(name)
    if labels:
        q = QueryGraph.from_edges(q.n, q.edges, [v % labels for v in range(q.n)], name)
    if cfg.strategy == "shrcube" and w < 2:
        w = 2
    res = run_strategy(q, g, _enum(cfg, batch_size=3), num_workers=w)
    assert res.matches == list(brute_force(q, g).matches)


def test_compression_does_not_change_results():
    g = random_graph(30, 0.2, seed=11)
    for name in ("path5", "house", "square"):
        q = corpus_query(name)
        for strategy in ("binjoin", "woptjoin"):
            plain = run_strategy(q, g, _enum(StrategyConfig(strategy)), num_workers=3)
            packed = run_strategy(q, g, _enum(StrategyConfig(strategy, compression=True)), num_workers=3)
            assert plain.matches == packed.matches


def test_batching_union_equals_unbatched():
    g = random_graph(30, 0.2, seed=12)
    q = corpus_query("square")
    for strategy in ("binjoin", "woptjoin"):
        whole = run_strategy(q, g, _enum(StrategyConfig(strategy)), num_workers=3)
        parts = run_strategy(q, g, _enum(StrategyConfig(strategy, batching=True, batch_size=4)), num_workers=3)
        huge = run_strategy(q, g, _enum(StrategyConfig(strategy, batching=True, batch_size=10**6)), num_workers=3)
        assert whole.matches == parts.matches == huge.matches


def _prefix_counts(q, order_vertices, g):
    sbo = symmetry_break_order(q)
    out = []
    for i in range(1, len(order_vertices) + 1):
        vs = order_vertices[:i]
        pos = {v: k for k, v in enumerate(vs)}
        sub = subquery(q, vs)
        restricted = PartialOrder(frozenset((pos[a], pos[b]) for a, b in sbo.restricted(vs).pairs))
        out.append(brute_force(sub, g, order=restricted).count)
    return out


@pytest.mark.parametrize("name", ["house", "clique4", "double_square", "path5"])
@pytest.mark.parametrize("trindexing", [False, True])
def test_woptjoin_level_counts(name, trindexing):
    g = random_graph(30, 0.15, seed=21)
    q = corpus_query(name)
    res = run_strategy(q, g, StrategyConfig("woptjoin", trindexing=trindexing), num_workers=3)
    assert res.level_counts == _prefix_counts(q, res.plan.vertices, g)


def test_k4_level_counts_on_k5():
    q = corpus_query("clique4")
    res = run_strategy(q, complete_graph(5), StrategyConfig("woptjoin"), num_workers=2)
    assert res.level_counts == _prefix_counts(q, res.plan.vertices, complete_graph(5))


@pytest.mark.parametrize("name", ["diamond", "house", "chordal_house", "clique4"])
def test_binjoin_overlapped_nodes_are_full_subquery_matches(name):
    g = random_graph(25, 0.3, seed=4)
    q = corpus_query(name)
    sbo = symmetry_break_order(q)
    res = run_strategy(q, g, StrategyConfig("binjoin", trindexing=True), num_workers=3)
    totals: dict = {}
    for o in res.per_worker:
        for edges, n in o.stats["node_rows"].items():
            totals[edges] = totals.get(edges, 0) + n
    assert any(l.unit.kind == "clique" for l in res.plan.root.leaves())
    for edges, n in totals.items():
        vs = sorted({x for e in edges for x in e})
        pos = {v: k for k, v in enumerate(vs)}
        sub = subquery(q, vs, edges)
        restricted = PartialOrder(frozenset((pos[a], pos[b]) for a, b in sbo.restricted(vs).pairs))
        assert n == brute_force(sub, g, order=restricted).count, edges


def test_clique_units_need_triangle_partition():
    q = corpus_query("diamond")
    g = random_graph(15, 0.3, seed=1)
    cfg = StrategyConfig("binjoin", trindexing=True)
    with pytest.raises(ConfigError):
        run_strategy(q, g, cfg, partitions=make_partitions(g, 2, "hash"))
    with pytest.raises(ConfigError):
        run_strategy(q, g, StrategyConfig("woptjoin", trindexing=True), partitions=make_partitions(g, 2, "hash"))


def test_shrcube_and_fullrep_ignore_flags():
    cfg = StrategyConfig("shrcube", batching=True, trindexing=True, compression=True)
    assert cfg.opts == "none" and cfg.partition_mode == "hash"


def test_shrcube_needs_enough_workers():
    q = corpus_query("triangle")
    g = complete_graph(5)
    with pytest.raises(ConfigError):
        run_strategy(q, g, StrategyConfig("shrcube"), num_workers=2, plan=HypercubeShares((2, 2, 2)))


def test_shrcube_dedup_worked_example():
    # triangle on the even vertices 0, 2, 4; every coordinate hashes to 0 with b = 2
    g = from_edges(6, [(0, 2), (2, 4), (0, 4), (1, 3), (3, 5)])
    q = corpus_query("triangle")
    shares = HypercubeShares((2, 2, 2))
    raw = run_shrcube_cells(q, g, shares, dedup=False)
    assert (0, 2, 4) in raw[shares.worker_of((0, 0, 0))]
    assert (0, 2, 4) in raw[shares.worker_of((0, 0, 1))]
    kept = run_shrcube_cells(q, g, shares, dedup=True)
    assert kept[shares.worker_of((0, 0, 0))] == [(0, 2, 4)]
    assert sum(len(c) for c in kept) == 1


def test_shrcube_each_match_once():
    g = random_graph(30, 0.3, seed=5)
    for name in ("triangle", "square", "diamond"):
        q = corpus_query(name)
        cells = run_shrcube_cells(q, g, HypercubeShares((2,) * q.n), dedup=True)
        flat = sorted(m for c in cells for m in c)
        assert flat == list(brute_force(q, g).matches)


def test_shrcube_single_worker_equals_local_matcher(example_graph, diamond):
    res = run_strategy(diamond, example_graph, _enum(StrategyConfig("shrcube")), num_workers=1)
    local = local_match(diamond, GraphView(example_graph), MatchConstraints.for_query(diamond))
    assert res.matches == sorted(local)
    assert res.total_recv_integers == 0


@pytest.mark.parametrize("w", [1, 2, 5])
def test_fullrep_disjoint_and_silent(w):
    g = random_graph(25, 0.25, seed=7)
    q = corpus_query("house")
    res = run_strategy(q, g, _enum(StrategyConfig("fullrep")), num_workers=w)
    per = [set(o.matches) for o in res.per_worker]
    assert sum(len(s) for s in per) == len(set().union(*per))
    assert res.matches == list(brute_force(q, g).matches)
    assert res.total_recv_integers == 0


def test_local_matcher_on_random_graph():
    g = random_graph(25, 0.2, seed=9)
    for name, q in corpus().items():
        got = local_match(q, GraphView(g), MatchConstraints.for_query(q))
        assert sorted(got) == list(brute_force(q, g).matches), name


def test_plan_depends_on_strategy():
    q = corpus_query("diamond")
    m = CostModel("er", 100, 495)
    assert make_plan(q, StrategyConfig("shrcube"), m, 8).num_cells <= 8
    assert set(make_plan(q, StrategyConfig("fullrep"), m, 8)) == set(range(4))


def test_metrics_row(example_graph, diamond):
    res = run_strategy(diamond, example_graph, StrategyConfig("woptjoin"), num_workers=2)
    row = res.metrics()
    assert row["result_count"] == 3 and row["strategy"] == "woptjoin" and row["opts"] == "none"
    assert row["T"] >= row["T_comp"] >= 0 and row["T_comm"] == pytest.approx(row["T"] - row["T_comp"], abs=1e-5)
