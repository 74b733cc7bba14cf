import itertools
import math
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coarsekit import sl2
from coarsekit.graphs import (INFINITY, BoxSpaceError, DisconnectedGraphError, ExactModeRefused, FiniteGraph,
                              FiniteMetricSpace, GenerationError, GraphError, assemble_box_space, cayley_graph_sl2,
                              closed_neighbourhood_ratio, diameter, expansion_constant, girth, moore_bound,
                              random_regular_with_girth, shortest_path_metric, spectral_profile)


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.vertex_count))
    h.add_edges_from(g.edges)
    return h


def brute_expansion(g):
    n = g.vertex_count
    best = None
    for size in range(1, n // 2 + 1):
        for subset in itertools.combinations(range(n), size):
            r = closed_neighbourhood_ratio(g, subset)
            best = r if best is None else min(best, r)
    return best


@st.composite
def connected_graphs(draw, min_n=2, max_n=12):
    n = draw(st.integers(min_n, max_n))
    tree = FiniteGraph.random_tree(n, draw(st.integers(0, 10**6)))
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges = set(tree.edges) | {(min(u, v), max(u, v)) for u, v in extra if u != v}
    return FiniteGraph(n, tuple(sorted(edges)))


# -- construction and validation ----------------------------------------------------

def test_rejects_loops_and_parallel_edges():
    with pytest.raises(GraphError):
        FiniteGraph(3, ((0, 0),))
    with pytest.raises(GraphError):
        FiniteGraph(3, ((0, 1), (1, 0)))
    with pytest.raises(GraphError):
        FiniteGraph(3, ((0, 3),))


def test_degree_bound_recorded():
    g = FiniteGraph.cycle(5)
    assert g.D == 2
    assert FiniteGraph(3, ((0, 1), (1, 2)), degree_bound=4).D == 4
    with pytest.raises(GraphError):
        FiniteGraph(4, ((0, 1), (0, 2), (0, 3)), degree_bound=2)


def test_json_and_edge_list_round_trip(tmp_path):
    g = FiniteGraph.petersen()
    assert FiniteGraph.from_json(g.to_json()) == g
    text = "# petersen\n" + "\n".join(f"{u} {v}" for u, v in g.edges)
    assert FiniteGraph.from_edge_list(text) == g
    p = tmp_path / "g.txt"
    p.write_text(text)
    assert FiniteGraph.load(p) == g


# -- metrics ------------------------------------------------------------------------

def test_cycle_distances(backend):
    d = shortest_path_metric(FiniteGraph.cycle(5)).dist
    assert d[0, 1] == 1 and d[0, 2] == 2 and d.max() == 2


def test_petersen_metric_matches_networkx(backend):
    g = FiniteGraph.petersen()
    d = shortest_path_metric(g).dist
    oracle = dict(nx.all_pairs_shortest_path_length(nx.petersen_graph()))
    # same labelling: outer cycle 0-4, spokes i -> i+5, inner pentagram
    assert d.max() == 2
    assert nx.is_isomorphic(to_nx(g), nx.petersen_graph())
    assert max(max(r.values()) for r in oracle.values()) == 2


def test_disconnected_metric_names_pair(backend):
    with pytest.raises(DisconnectedGraphError) as err:
        shortest_path_metric(FiniteGraph(4, ((0, 1), (2, 3))))
    assert err.value.pair == (0, 2)


@settings(max_examples=60, deadline=None)
@given(connected_graphs(max_n=15))
def test_metric_matches_networkx(g):
    d = shortest_path_metric(g).dist
    for s, row in nx.all_pairs_shortest_path_length(to_nx(g)):
        for t, v in row.items():
            assert d[s, t] == v
    assert shortest_path_metric(g).triangle_violation() is None


def test_metric_csv_round_trip():
    m = shortest_path_metric(FiniteGraph.cycle(6))
    back = FiniteMetricSpace.from_csv(m.to_csv())
    assert np.array_equal(back.dist, m.dist)
    assert back.labels == tuple(str(i) for i in range(6))


def test_triangle_violation_witness():
    d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    x, y, z = FiniteMetricSpace(d).triangle_violation()
    assert d[x, z] > d[x, y] + d[y, z]


# -- girth ---------------------------------------------------------------------------

def test_girth_examples(backend):
    assert girth(FiniteGraph.cycle(7)) == 7
    assert girth(FiniteGraph.petersen()) == 5
    assert girth(FiniteGraph.random_tree(30, 4)) == INFINITY
    assert girth(FiniteGraph.complete_bipartite(3, 3)) == 4


@settings(max_examples=60, deadline=None)
@given(connected_graphs(max_n=14))
def test_girth_matches_networkx_and_diameter_bound(g):
    gi = girth(g)
    oracle = nx.girth(to_nx(g))
    assert gi == oracle
    if gi != math.inf:
        assert gi <= 2 * diameter(g) + 1


# -- expansion and spectra -----------------------------------------------------------

def test_expansion_examples(backend):
    assert expansion_constant(FiniteGraph.complete(4)).expansion_exact == 2
    assert expansion_constant(FiniteGraph.cycle(8)).expansion_exact == Fraction(3, 2)


def test_expansion_refuses_large_graphs():
    with pytest.raises(ExactModeRefused, match="24"):
        expansion_constant(FiniteGraph.cycle(25))
    assert expansion_constant(FiniteGraph.cycle(25), mode="spectral").expansion_exact is None


@settings(max_examples=40, deadline=None)
@given(connected_graphs(max_n=11))
def test_exact_expansion_matches_brute_force_and_bracket(g):
    rep = expansion_constant(g)
    assert rep.expansion_exact == brute_expansion(g)
    assert rep.expansion_lower <= float(rep.expansion_exact) + 1e-12
    assert float(rep.expansion_exact) <= rep.expansion_upper + 1e-12


def test_bracket_on_sl2_mod5_subsample():
    g = cayley_graph_sl2(5)
    rep = spectral_profile(g)
    assert 1.0 < rep.expansion_lower <= rep.expansion_upper
    # the upper bound is realised by an actual set, so it can never beat the exact value
    sub = g.induced_subgraph(list(range(0, 120, 6)))
    for comp in sub.components():
        if len(comp) >= 2:
            part = sub.induced_subgraph(comp)
            r = expansion_constant(part)
            assert r.expansion_lower <= float(r.expansion_exact) <= r.expansion_upper + 1e-12


def test_spectra_closed_forms(backend):
    for n in (3, 6, 9):
        ev = spectral_profile(FiniteGraph.complete(n)).adjacency_eigenvalues
        assert np.allclose(ev, sorted([n - 1] + [-1] * (n - 1)))
        ev = spectral_profile(FiniteGraph.cycle(n)).adjacency_eigenvalues
        assert np.allclose(ev, sorted(2 * np.cos(2 * np.pi * np.arange(n) / n)))
    ev = spectral_profile(FiniteGraph.petersen()).adjacency_eigenvalues
    assert np.allclose(ev, [-2] * 4 + [1] * 5 + [3])


@settings(max_examples=30, deadline=None)
@given(connected_graphs(max_n=12))
def test_spectral_invariants(g):
    rep = spectral_profile(g)
    assert np.all(np.abs(rep.adjacency_eigenvalues) <= g.D + 1e-9)
    assert rep.laplacian_eigenvalues[-1] <= 2 + 1e-9
    assert np.allclose(rep.adjacency_eigenvalues, np.linalg.eigvalsh(g.adjacency_matrix()), atol=1e-9)


# -- Cayley graphs ---------------------------------------------------------------------

@pytest.mark.parametrize("n,order", [(2, 6), (3, 24), (4, 48), (5, 120), (6, 144)])
def test_cayley_orders(n, order):
    g = cayley_graph_sl2(n)
    assert g.vertex_count == order == sl2.sl2_order(n)
    assert g.is_connected()


def test_cayley_rejects_bad_generators():
    with pytest.raises(GraphError, match="determinant"):
        cayley_graph_sl2(5, [(2, 0, 0, 1)])
    with pytest.raises(GraphError, match="inverses"):
        cayley_graph_sl2(5, [sl2.T])


def test_cayley_vertex_transitive_spectrum():
    g = cayley_graph_sl2(4)
    base = np.linalg.eigvalsh(g.adjacency_matrix())
    for root in (0, 17, 40):
        order = np.argsort(g.bfs(root), kind="stable")
        a = g.adjacency_matrix()[np.ix_(order, order)]
        assert np.allclose(np.linalg.eigvalsh(a), base)


# -- random regular graphs of large girth ------------------------------------------------

def test_moore_bound():
    assert moore_bound(3, 5) == 10
    assert moore_bound(3, 7) == 22
    assert moore_bound(3, 6) == 14


def test_two_regular_is_cycle():
    g = random_regular_with_girth(2, 9, 9, seed=3)
    assert nx.is_isomorphic(to_nx(g), nx.cycle_graph(9))


def test_petersen_size():
    g = random_regular_with_girth(3, 10, 5, seed=1)
    assert girth(g) >= 5 and {g.degree(v) for v in range(10)} == {3}
    assert nx.is_isomorphic(to_nx(g), nx.petersen_graph())


def test_infeasible_names_moore_bound():
    with pytest.raises(GenerationError, match="Moore bound"):
        random_regular_with_girth(3, 10, 7, seed=0)
    with pytest.raises(GenerationError):
        random_regular_with_girth(3, 11, 5, seed=0)


@pytest.mark.parametrize("n,g", [(60, 6), (200, 7), (400, 8)])
def test_regular_girth_output(n, g):
    out = random_regular_with_girth(3, n, g, seed=5)
    assert {out.degree(v) for v in range(n)} == {3}
    assert nx.girth(to_nx(out)) >= g


def test_generation_is_reproducible():
    a = random_regular_with_girth(3, 100, 7, seed=11)
    b = random_regular_with_girth(3, 100, 7, seed=11)
    assert a.edges == b.edges


# -- box spaces ----------------------------------------------------------------------------

def test_single_piece_box():
    g = FiniteGraph.petersen()
    b = assemble_box_space([g])
    assert np.array_equal(b.metric.dist, shortest_path_metric(g).dist)


def test_two_pieces_cross_distance():
    b = assemble_box_space([FiniteGraph.cycle(4), FiniteGraph.cycle(5)], [10, 11])
    d = b.metric.dist
    assert d[:4, 4:].min() >= 10


def test_box_preserves_pieces_and_separations_grow():
    pieces = [FiniteGraph.cycle(n) for n in (4, 8, 16)]
    b = assemble_box_space(pieces)
    for k, p in enumerate(pieces):
        pts = list(b.piece_points(k))
        assert np.array_equal(b.metric.dist[np.ix_(pts, pts)], shortest_path_metric(p).dist)
    assert b.girths == (4, 8, 16)
    assert b.metric.triangle_violation() is None
    infs = []
    for k in range(3):
        pts = list(b.piece_points(k))
        rest = [i for i in range(b.size) if i not in pts]
        infs.append(b.metric.dist[np.ix_(pts, rest)].min())
    assert infs[1] < infs[2]
    assert [b.separation(k) for k in range(3)] == infs


def test_box_rejects_non_increasing_spacing_with_witness():
    pieces = [FiniteGraph.cycle(3)] * 3
    with pytest.raises(BoxSpaceError) as err:
        assemble_box_space(pieces, [1, 10, 3])
    x, y, z = err.value.witness
    box_dist = {0: {3: 10, 6: 3}, 3: {0: 10, 6: 3}, 6: {0: 3, 3: 3}}
    assert box_dist[x][z] > box_dist[x][y] + box_dist[y][z]
    with pytest.raises(BoxSpaceError):
        assemble_box_space(pieces[:2], [4, 4])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(3, 9), min_size=1, max_size=4), st.integers(0, 5))
def test_box_metric_is_a_metric(sizes, start):
    b = assemble_box_space([FiniteGraph.cycle(s) for s in sizes], lambda n: start + 2 * n)
    assert b.metric.triangle_violation() is None
    assert b.metric.axiom_violation() is None
    assert b.to_json() == type(b).from_json(b.to_json()).to_json()
