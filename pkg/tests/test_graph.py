import pytest
from hypothesis import given
import hypothesis.strategies as st

from conftest import small_graphs
from monodimer.graph import (Graph, GraphError, bits, boundary, classify, connected_component,
                             inclusive_boundary, is_matching, popcount, read_graph,
                             symmetric_difference_components, walk, write_graph)
from monodimer.harness.generators import cycle, path, star
from monodimer.model import MonomerDimerModel, enumerate_matchings


def test_rejects_loops_and_parallel_edges():
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(GraphError):
        Graph.from_edges(2, [(0, 2)])
    with pytest.raises(GraphError):
        Graph.from_edges(3, [(0, 1)], vertex_order=(0, 0, 1))


@given(small_graphs())
def test_adjacency_matches_edge_list(g):
    for i, (u, v) in enumerate(g.edges):
        assert u < v
        assert (g.incident[u] >> i) & 1 and (g.incident[v] >> i) & 1
    assert sum(popcount(x) for x in g.incident) == 2 * g.m
    assert g.max_degree == max(g.degree(v) for v in range(g.n))
    for i in range(g.m):
        assert not (g.adjacent[i] >> i) & 1
        for j in bits(g.adjacent[i]):
            assert g.shared_vertex(i, j) is not None


def test_p3_boundaries():
    g = path(3)
    assert g.edges == ((0, 1), (1, 2))
    assert g.max_degree == 2
    assert inclusive_boundary(g, 0b01) == 0b11
    assert boundary(g, 0b01) == 0b10
    assert is_matching(g, [1, 0]) and not is_matching(g, 0b11)


def test_mask_validation():
    g = path(3)
    with pytest.raises(GraphError):
        g.check_mask(0b100)
    with pytest.raises(GraphError):
        g.check_mask([1, 0, 0])
    assert g.check_mask([0, 1]) == 0b10


def test_classify_kinds():
    c = cycle(4)
    assert classify(c, c.full_mask)[0] == "even_cycle"
    assert classify(cycle(3), 0b111)[0] == "other"
    assert classify(star(3), 0b111)[0] == "other"
    kind, ends = classify(path(5), 0b0110)
    assert kind == "path" and ends == (1, 3)


def test_walk_and_ordering_from_larger_endpoint():
    g = path(4)
    comps = symmetric_difference_components(g, 0b101, 0b010)
    assert len(comps) == 1
    b = comps[0]
    assert b.kind == "path"
    assert b.ordered_edges(g) == [2, 1, 0]
    # reversing the vertex order flips the numbering
    h = Graph(4, g.edges, (3, 2, 1, 0))
    assert symmetric_difference_components(h, 0b101, 0b010)[0].ordered_edges(h) == [0, 1, 2]
    with pytest.raises(GraphError):
        walk(g, 0b111, 1)


def test_cycle_ordering_starts_at_top_vertex():
    g = cycle(4)  # edges (0,1), (0,3), (1,2), (2,3)
    x = g.mask([g.edge_index(0, 1), g.edge_index(2, 3)])
    y = g.full_mask & ~x
    (b,) = symmetric_difference_components(g, x, y)
    order = b.ordered_edges(g, x)
    assert order[0] == g.edge_index(2, 3)
    assert len(order) == 4
    with pytest.raises(GraphError):
        b.ordered_edges(g)


@given(small_graphs(), st.data())
def test_difference_of_matchings_is_paths_and_even_cycles(g, data):
    support = enumerate_matchings(MonomerDimerModel(g, 1)).support
    x = data.draw(st.sampled_from(support))
    y = data.draw(st.sampled_from(support))
    comps = symmetric_difference_components(g, x, y)
    assert all(c.kind in ("path", "even_cycle") for c in comps)
    union = 0
    for c in comps:
        assert union & c.edges == 0
        union |= c.edges
        assert connected_component(g, x ^ y, next(bits(c.edges))) == c.edges
        assert len(c.ordered_edges(g, x if (x & c.edges) else y)) == len(c)
    assert union == x ^ y


def test_graph_file_roundtrip(tmp_path):
    text = "# a triangle with a tail\n4 4\n2 3\n0 1\n1 2  # middle\n0 2\n"
    g = read_graph(text)
    assert g.edges == ((2, 3), (0, 1), (1, 2), (0, 2))
    assert read_graph(write_graph(g)) == g
    with pytest.raises(GraphError):
        read_graph("3 2\n0 1\n")
    with pytest.raises(GraphError):
        read_graph("")
