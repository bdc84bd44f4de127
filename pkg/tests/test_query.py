import pytest

from submatch.graph import random_graph
from submatch.oracle import brute_force
from submatch.query import (
    CORPUS_NAMES, JoinUnit, PartialOrder, QueryFormatError, QueryGraph, automorphisms, core_crystal_decompose,
    corpus, corpus_query, count_linear_extensions, enumerate_join_units, min_connected_vertex_cover,
    parse_query, subquery, symmetry_break_order,
)

ASYMMETRIC = [(0, 1), (0, 2), (0, 3), (0, 5), (1, 2), (2, 3), (3, 4), (3, 5)]
STAR3 = QueryGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)], name="star3")


def test_automorphism_counts():
    assert len(automorphisms(corpus_query("triangle"))) == 6
    assert len(automorphisms(corpus_query("diamond"))) == 4
    labelled = QueryGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)], [1, 2, 3])
    assert automorphisms(labelled) == [(0, 1, 2)]


def test_triangle_order_is_a_chain():
    closure = symmetry_break_order(corpus_query("triangle")).closure()
    assert len(closure) == 3
    assert count_linear_extensions(range(3), symmetry_break_order(corpus_query("triangle"))) == 1


def test_diamond_order_breaks_both_swaps():
    order = symmetry_break_order(corpus_query("diamond"))
    assert order.closure() == {(0, 2), (1, 3)}


def test_asymmetric_query_has_empty_order():
    q = QueryGraph.from_edges(6, ASYMMETRIC)
    assert len(automorphisms(q)) == 1
    assert not symmetry_break_order(q).pairs


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_order_factor_equals_automorphism_count(name):
    q = corpus_query(name)
    order = symmetry_break_order(q)
    assert order.is_acyclic()
    aut = len(automorphisms(q))
    assert count_linear_extensions(range(q.n), order) * aut == pytest.approx(
        count_linear_extensions(range(q.n), PartialOrder()))
    for seed in range(3):
        g = random_graph(14, 0.45, seed=seed)
        assert brute_force(q, g, use_order=False).count == aut * brute_force(q, g).count


def test_min_connected_vertex_cover_examples():
    cover = min_connected_vertex_cover(corpus_query("triangle"))
    assert len(cover) == 2
    assert min_connected_vertex_cover(STAR3) == {0}
    assert min_connected_vertex_cover(corpus_query("path5")) == {1, 2, 3}


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_cover_validity(name):
    q = corpus_query(name)
    cover = min_connected_vertex_cover(q)
    assert all(a in cover or b in cover for a, b in q.edges)
    assert QueryGraph.from_edges(len(cover), subquery(q, sorted(cover)).edges).is_connected


def test_join_units_diamond():
    q = corpus_query("diamond")
    indexed = enumerate_join_units(q, True)
    assert JoinUnit.clique({0, 1, 3}) in indexed
    assert JoinUnit.clique({1, 2, 3}) in indexed
    plain = enumerate_join_units(q, False)
    assert all(u.kind == "star" for u in plain)
    assert JoinUnit.star(1, {0, 2, 3}) in plain


def test_triangle_free_query_has_no_clique_units():
    assert all(u.kind == "star" for u in enumerate_join_units(corpus_query("square"), True))


def test_core_crystal_examples():
    cc = core_crystal_decompose(corpus_query("diamond"))
    assert cc.core == {1, 3}
    assert [(c.clique_vertices, c.buds) for c in cc.crystals] == [({1, 3}, {0, 2})]
    cc = core_crystal_decompose(corpus_query("clique4"))
    assert len(cc.core) == 3 and len(cc.crystals) == 1 and cc.crystals[0].y == 1
    cc = core_crystal_decompose(STAR3)
    assert cc.core == {0}
    assert [(c.x, c.y) for c in cc.crystals] == [(1, 3)]


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_core_crystal_reassembly(name):
    q = corpus_query(name)
    cc = core_crystal_decompose(q)
    assert set(cc.core_edges) | cc.crystal_edges() == set(q.edges)
    buds = [b for c in cc.crystals for b in c.buds]
    assert sorted(buds) == sorted(set(range(q.n)) - cc.core)


def test_parse_query_round_trip():
    q = QueryGraph.from_edges(3, [(0, 1), (1, 2)], [5, None, 7])
    assert parse_query(q.to_text()) == QueryGraph.from_edges(3, [(0, 1), (1, 2)], [5, None, 7])


def test_parse_query_errors():
    with pytest.raises(QueryFormatError):
        parse_query("3\n0 1\n")  # disconnected
    with pytest.raises(QueryFormatError):
        parse_query("0 1\n")
    with pytest.raises(QueryFormatError):
        parse_query("2\n0 1 2 3\n")


def test_corpus_has_nine_queries():
    shapes = {name: (q.n, q.m) for name, q in corpus().items()}
    assert shapes == {
        "triangle": (3, 3), "square": (4, 4), "diamond": (4, 5), "clique4": (4, 6), "house": (5, 6),
        "chordal_house": (5, 7), "path5": (5, 4), "clique5": (5, 10), "double_square": (6, 7),
    }
