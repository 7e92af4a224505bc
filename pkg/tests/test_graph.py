import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyaurn.graph import (
    BipartiteKind,
    DisconnectedGraphError,
    DuplicateEdgeError,
    Graph,
    InvalidLabelError,
    ParseError,
    SelfLoopError,
    TooManyVerticesError,
    classify_bipartiteness,
    is_vertex_cover,
    parse_edge_list,
    vertex_covers,
)
from polyaurn.verify import load_fixtures

TRIANGLE = Graph.from_edges([(1, 2), (2, 3), (1, 3)])
K32 = Graph.from_edges([(a, b) for a in (1, 2, 3) for b in (4, 5)])
CYCLE4 = Graph.from_edges([(1, 2), (2, 3), (3, 4), (4, 1)])
K2 = Graph.from_edges([(1, 2)])


@pytest.mark.parametrize(
    "text, m, N",
    [("1 2\n2 3\n1 3", 3, 3), ("1 2", 2, 1), ("# header\n\n1 2\n  2 3  \n", 3, 2)],
)
def test_parse(text, m, N):
    g = parse_edge_list(text)
    assert (g.m, g.N) == (m, N)


@pytest.mark.parametrize(
    "text, exc, line",
    [
        ("1 2\n3 4", DisconnectedGraphError, 2),
        ("1 2\n2 2", SelfLoopError, 2),
        ("1 2\n2 1", DuplicateEdgeError, 2),
        ("1 2\n0 1", InvalidLabelError, 2),
        ("1 2\n2 a", ParseError, 2),
        ("1 2 3", ParseError, 1),
        ("# only a comment\n", ParseError, None),
    ],
)
def test_parse_errors(text, exc, line):
    with pytest.raises(exc) as info:
        parse_edge_list(text)
    assert info.value.line == line
    if line is not None:
        assert str(info.value).startswith(f"line {line}:")


def test_edges_keep_input_order_normalized():
    g = parse_edge_list("3 1\n1 2\n3 2")
    assert g.edges == ((1, 3), (1, 2), (2, 3))
    np.testing.assert_array_equal(g.edge_array, [[0, 2], [0, 1], [1, 2]])
    assert g.incidence.sum(axis=1).tolist() == [2, 2, 2]


def test_fixtures_load():
    fx = load_fixtures()
    assert {k: (g.m, g.N) for k, g in fx.items()} == {
        "k2": (2, 1), "triangle": (3, 3), "cycle4": (4, 4), "k32": (5, 6), "cycle6": (6, 6), "k4": (4, 6),
    }


@pytest.mark.parametrize(
    "g, kind, A, B",
    [
        (TRIANGLE, BipartiteKind.NOT_BIPARTITE, set(), set()),
        (K32, BipartiteKind.UNBALANCED, {1, 2, 3}, {4, 5}),
        (CYCLE4, BipartiteKind.BALANCED, {1, 3}, {2, 4}),
        (K2, BipartiteKind.BALANCED, {1}, {2}),
    ],
)
def test_classify(g, kind, A, B):
    bc = classify_bipartiteness(g)
    assert bc.kind is kind and bc.A == A and bc.B == B


def test_classify_str():
    assert str(classify_bipartiteness(K32)) == "unbalanced-bipartite A={1,2,3} B={4,5}"
    assert str(classify_bipartiteness(TRIANGLE)) == "not-bipartite"


def _connected_graphs(max_m):
    """Every connected labeled graph with up to max_m vertices (small m only)."""
    for m in range(2, max_m + 1):
        pairs = list(itertools.combinations(range(1, m + 1), 2))
        for mask in range(1, 1 << len(pairs)):
            edges = [p for k, p in enumerate(pairs) if mask >> k & 1]
            h = nx.Graph(edges)
            h.add_nodes_from(range(1, m + 1))
            if nx.is_connected(h):
                yield Graph.from_edges(edges, m), h


def test_bipartite_matches_networkx_exhaustive():
    count = 0
    for g, h in _connected_graphs(5):
        bc = classify_bipartiteness(g)
        assert bc.is_bipartite == nx.is_bipartite(h)
        if bc.is_bipartite:
            assert 1 in bc.A
            assert all((i in bc.A) != (j in bc.A) for i, j in g.edges)
            assert bc.is_balanced == (len(bc.A) == len(bc.B))
        count += 1
    assert count == 1 + 4 + 38 + 728


@st.composite
def connected_graphs(draw, max_m=7):
    m = draw(st.integers(2, max_m))
    # random spanning tree plus extra edges
    edges = {tuple(sorted((k, draw(st.integers(1, k - 1))))) for k in range(2, m + 1)}
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    edges |= set(draw(st.lists(st.sampled_from(pairs), max_size=len(pairs))))
    return Graph.from_edges(sorted(edges), m)


@settings(max_examples=200, deadline=None)
@given(connected_graphs(), st.randoms(use_true_random=False))
def test_bipartite_relabel_invariant(g, rnd):
    perm = list(range(1, g.m + 1))
    rnd.shuffle(perm)
    h = Graph.from_edges([(perm[i - 1], perm[j - 1]) for i, j in g.edges], g.m)
    a, b = classify_bipartiteness(g), classify_bipartiteness(h)
    assert a.kind == b.kind
    if a.is_bipartite:
        sizes = sorted((len(a.A), len(a.B)))
        assert sizes == sorted((len(b.A), len(b.B)))


@pytest.mark.parametrize(
    "g, expected",
    [
        (K2, [{1}, {2}, {1, 2}]),
        (TRIANGLE, [{1, 2}, {1, 3}, {2, 3}, {1, 2, 3}]),
    ],
)
def test_vertex_covers_examples(g, expected):
    assert vertex_covers(g) == [frozenset(s) for s in expected]


def test_cycle4_covers_are_complements_of_independent_sets():
    covers = vertex_covers(CYCLE4)
    assert len(covers) == 7
    h = nx.cycle_graph([1, 2, 3, 4])
    comp = nx.complement(h)
    independents = {frozenset(c) for c in nx.enumerate_all_cliques(comp)} | {frozenset()}
    assert set(covers) == {frozenset({1, 2, 3, 4}) - s for s in independents}


@settings(max_examples=100, deadline=None)
@given(connected_graphs())
def test_vertex_covers_brute_force(g):
    expected = [
        frozenset(s)
        for k in range(g.m + 1)
        for s in itertools.combinations(range(1, g.m + 1), k)
        if all(i in s or j in s for i, j in g.edges)
    ]
    assert vertex_covers(g) == expected
    assert all(is_vertex_cover(g, s) for s in expected)


def test_vertex_cover_cap():
    path = Graph.from_edges([(k, k + 1) for k in range(1, 22)])
    with pytest.raises(TooManyVerticesError):
        vertex_covers(path)
    assert len(vertex_covers(path, max_m=22)) > 0
