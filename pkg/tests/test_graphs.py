import pytest
from hypothesis import given, strategies as st

from congestgi.graphs import (
    Graph,
    GraphError,
    format_graph_text,
    hamming_distance,
    parse_edge_stream,
    parse_graph_text,
)


def complete(n):
    return Graph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def test_basic_adjacency():
    g = Graph(3, [(0, 1), (1, 2)])
    assert g.adj(0, 1) and g.adj(1, 0)
    assert not g.adj(0, 2)
    assert g.neighbors(1) == (0, 2)
    assert g.degree(1) == 2 and g.degree(0) == 1


def test_rejects_self_loop_and_duplicates():
    with pytest.raises(GraphError):
        Graph(3, [(1, 1)])
    with pytest.raises(GraphError):
        Graph(3, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Graph(2, [(0, 5)])


def test_hamming_identical_is_zero():
    g = complete(4)
    assert hamming_distance(g, g) == 0


def test_hamming_one_edge_removed_is_two():
    g = complete(4)
    h = Graph(4, sorted(g.edges - {(0, 1)}))
    assert hamming_distance(g, h) == 2


def test_hamming_k3_vs_empty():
    assert hamming_distance(complete(3), Graph(3, [])) == 6


def test_hamming_size_mismatch():
    with pytest.raises(GraphError):
        hamming_distance(complete(3), complete(4))


@given(st.integers(2, 7), st.randoms(use_true_random=False))
def test_hamming_is_a_metric_on_random_triples(n, rng):
    def rand_graph():
        return Graph(
            n,
            [
                (u, v)
                for u in range(n)
                for v in range(u + 1, n)
                if rng.random() < 0.5
            ],
        )

    a, b, c = rand_graph(), rand_graph(), rand_graph()
    assert hamming_distance(a, b) == hamming_distance(b, a)
    assert hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c)
    assert (hamming_distance(a, b) == 0) == (a == b)


def test_text_roundtrip():
    g = Graph(5, [(0, 2), (1, 4), (2, 3)])
    assert parse_graph_text(format_graph_text(g)) == g


def test_parse_rejects_bad_files():
    with pytest.raises(GraphError):
        parse_graph_text("")
    with pytest.raises(GraphError):
        parse_graph_text("2 1\n1 0\n")  # u < v required
    with pytest.raises(GraphError):
        parse_graph_text("3 2\n0 1\n")  # count mismatch
    with pytest.raises(GraphError):
        parse_graph_text("3 2\n0 1\n0 1\n")  # duplicate


def test_parse_ignores_comments():
    g = parse_graph_text("# a comment\n3 1\n# another\n0 2\n")
    assert g.n == 3 and g.edges == frozenset({(0, 2)})


def test_edge_stream_parsing():
    assert list(parse_edge_stream("0 1\n# c\n2 3\n")) == [(0, 1), (2, 3)]


def test_connectivity_and_eccentricity():
    path = Graph(4, [(0, 1), (1, 2), (2, 3)])
    assert path.is_connected()
    assert path.eccentricity(0) == 3
    assert path.diameter() == 3
    assert not Graph(4, [(0, 1), (2, 3)]).is_connected()


def test_relabel():
    g = Graph(3, [(0, 1)])
    h = g.relabel([2, 1, 0])
    assert h.edges == frozenset({(1, 2)})
