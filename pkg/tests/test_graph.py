import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from submatch.graph import (
    GraphFormatError, complete_graph, from_edges, load_csr, load_edge_list, neighbors,
    random_graph, relabel_by_degree, save_csr, stats,
)


def test_triangle_edge_list():
    g = load_edge_list("0 1\n1 2\n2 0")
    assert (g.num_vertices, g.num_edges) == (3, 3)
    assert neighbors(g, 0).tolist() == [1, 2]


def test_self_loop_and_duplicate_removed():
    g = load_edge_list("0 0\n0 1\n1 0")
    assert (g.num_vertices, g.num_edges) == (2, 1)


def test_ids_are_compacted():
    g = load_edge_list("5 7")
    assert (g.num_vertices, g.num_edges) == (2, 1)


def test_comments_and_blank_lines_ignored():
    g = load_edge_list("# header\n\n0 1\n  # note\n1 2\n")
    assert g.num_edges == 2


def test_malformed_line_names_line_number():
    with pytest.raises(GraphFormatError, match="line 2"):
        load_edge_list("0 1\n1 x\n")


def test_label_for_missing_edge_vertex_is_error():
    with pytest.raises(GraphFormatError):
        load_edge_list("0 1\n1 2\n", "0 5\n1 5\n")


def test_label_only_vertex_kept_isolated():
    g = load_edge_list("0 1\n", "0 1\n1 1\n9 2\n")
    assert g.num_vertices == 3
    assert g.degree(2) == 0
    assert g.label(2) == 2


def test_relabel_star_center_gets_largest_id():
    g, mapping = relabel_by_degree(load_edge_list("0 1\n0 2\n0 3\n"))
    assert mapping[0] == 3
    assert g.degree(3) == 3


def test_relabel_path_middle_gets_id_two():
    g, mapping = relabel_by_degree(load_edge_list("0 1\n1 2\n"))
    assert mapping[1] == 2
    assert sorted(mapping[[0, 2]].tolist()) == [0, 1]


def test_relabel_triangle_is_deterministic():
    g = load_edge_list("0 1\n1 2\n2 0")
    a = relabel_by_degree(g)[1].tolist()
    b = relabel_by_degree(g)[1].tolist()
    assert a == b == [0, 1, 2]


def test_neighbors_examples():
    path = load_edge_list("0 1\n1 2\n")
    assert neighbors(path, 1).tolist() == [0, 2]
    iso = from_edges(3, [(0, 1)])
    assert neighbors(iso, 2).tolist() == []
    with pytest.raises(IndexError):
        neighbors(iso, 3)


def test_stats_examples():
    s = stats(load_edge_list("0 1\n1 2\n2 0"))
    assert (s.num_vertices, s.num_edges, s.avg_degree, s.max_degree) == (3, 3, 2.0, 2)
    s = stats(load_edge_list("0 1\n0 2\n0 3\n"))
    assert (s.avg_degree, s.max_degree) == (1.5, 3)
    s = stats(from_edges(0, []))
    assert (s.num_vertices, s.num_edges, s.avg_degree) == (0, 0, 0.0)


def test_csr_round_trip(tmp_path):
    g = random_graph(40, 0.2, seed=3, num_labels=3)
    save_csr(g, tmp_path / "g.csr")
    h = load_csr(tmp_path / "g.csr")
    assert np.array_equal(g.offsets, h.offsets)
    assert np.array_equal(g.adjacency, h.adjacency)
    assert np.array_equal(g.labels, h.labels)
    m = load_csr(tmp_path / "g.csr", mmap=True)
    assert np.array_equal(g.adjacency, m.adjacency)


def test_truncated_csr_rejected(tmp_path):
    save_csr(complete_graph(4), tmp_path / "k4.csr")
    raw = (tmp_path / "k4.csr").read_bytes()
    (tmp_path / "bad.csr").write_bytes(raw[:-8])
    with pytest.raises(GraphFormatError):
        load_csr(tmp_path / "bad.csr")


edge_lists = st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), max_size=60)


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_csr_invariants(edges):
    text = "\n".join(f"{a} {b}" for a, b in edges)
    g = load_edge_list(text)
    g.validate()
    assert int(g.offsets[-1]) == 2 * g.num_edges
    for u in range(g.num_vertices):
        nb = neighbors(g, u).tolist()
        assert nb == sorted(set(nb)) and u not in nb
        for v in nb:
            assert u in neighbors(g, v).tolist()


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_relabel_is_degree_monotone_isomorphism(edges):
    g = load_edge_list("\n".join(f"{a} {b}" for a, b in edges))
    h, mapping = relabel_by_degree(g)
    assert sorted(mapping.tolist()) == list(range(g.num_vertices))
    degs = [h.degree(u) for u in range(h.num_vertices)]
    assert degs == sorted(degs)
    assert {tuple(sorted((int(mapping[a]), int(mapping[b])))) for a, b in g.edges()} == set(h.edges())
