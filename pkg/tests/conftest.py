import pytest

from submatch.graph import from_edges
from submatch.query import QueryGraph, corpus_query

# Six-vertex data graph with u1..u6 mapped to 0..5
EXAMPLE_EDGES = [(0, 1), (1, 5), (4, 5), (0, 4), (1, 4), (2, 4), (2, 5), (2, 3), (3, 4)]
# labels consistent with the two labelled matches (u1,u2,u6,u5) and (u4,u3,u6,u5)
EXAMPLE_LABELS = [0, 1, 1, 0, 3, 2]
DIAMOND_LABELS = [0, 1, 2, 3]


@pytest.fixture
def example_graph():
    return from_edges(6, EXAMPLE_EDGES)


@pytest.fixture
def labelled_example_graph():
    return from_edges(6, EXAMPLE_EDGES, EXAMPLE_LABELS)


@pytest.fixture
def diamond():
    return corpus_query("diamond")


@pytest.fixture
def labelled_diamond():
    q = corpus_query("diamond")
    return QueryGraph.from_edges(q.n, q.edges, DIAMOND_LABELS, "diamond_labelled")
