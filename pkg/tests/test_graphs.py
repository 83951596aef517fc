import math

import pytest

from sqwlab import (
    INF,
    ConsistentSubset,
    ball_vertices,
    build_graph,
    distances_from,
    edge_ball,
    edge_distance,
    graph_distance,
    sphere_vertices,
)


def test_cycle_basics():
    g = build_graph("cycle", size=8)
    assert g.vertex_count == 8
    assert g.edge_count == 16
    assert g.max_degree == 2
    assert g.degrees == (2,) * 8
    # basis sorted by (source, target)
    assert list(g.edges) == sorted(g.edges)
    assert g.edges[g.edge_index[(3, 4)]] == (3, 4)


def test_path_and_complete_counts():
    g = build_graph("path", size=5)
    assert g.edge_count == 8
    assert g.degrees == (1, 2, 2, 2, 1)
    k = build_graph("complete", size=4)
    assert k.edge_count == 12
    assert k.max_degree == 3


def test_torus_grid_counts():
    g = build_graph("torus_grid", rows=3, cols=3)
    assert g.vertex_count == 9
    assert g.edge_count == 36
    assert set(g.degrees) == {4}


def test_tree_shape():
    g = build_graph("tree", branching=2, depth=3)
    assert g.vertex_count == 15
    assert g.degrees[0] == 2
    assert sum(1 for d in g.degrees if d == 1) == 8  # leaves
    assert g.max_degree == 3
    # branching 1 degenerates to a path
    p = build_graph("tree", branching=1, depth=4)
    assert p.vertex_count == 5
    assert p.degrees == (1, 2, 2, 2, 1)


def test_explicit_edges_roundtrip():
    pairs = [(0, 1), (1, 0), (1, 2), (2, 1)]
    g = build_graph("explicit", edges=pairs)
    assert g.edge_count == 4
    assert g.neighbors[1] == (0, 2)


def test_explicit_requires_reversal_closure():
    with pytest.raises(ValueError, match="reversed partner"):
        build_graph("explicit", edges=[(0, 1), (1, 0), (1, 2)])


def test_explicit_disconnected_needs_flag():
    pairs = [(0, 1), (1, 0), (2, 3), (3, 2)]
    with pytest.raises(ValueError, match="disconnected"):
        build_graph("explicit", edges=pairs)
    g = build_graph("explicit", edges=pairs, allow_disconnected=True)
    assert g.vertex_count == 4


@pytest.mark.parametrize("spec", [
    {"kind": "cycle", "size": 2},
    {"kind": "path", "size": 1},
    {"kind": "torus_grid", "rows": 2, "cols": 3},
    {"kind": "complete", "size": 1},
    {"kind": "tree", "branching": 0, "depth": 2},
    {"kind": "pentagon"},
])
def test_malformed_specs_rejected(spec):
    with pytest.raises(ValueError):
        build_graph(spec)


def test_unknown_parameter_rejected():
    with pytest.raises(ValueError, match="unknown parameter"):
        build_graph("cycle", size=8, girth=3)


def test_distances_on_cycle():
    g = build_graph("cycle", size=10)
    assert graph_distance(g, 0, 5) == 5
    assert graph_distance(g, 0, 7) == 3
    d = distances_from(g, 2)
    assert d[2] == 0 and max(d) == 5


def test_distance_infinite_across_components():
    g = build_graph("explicit", edges=[(0, 1), (1, 0), (2, 3), (3, 2)],
                    allow_disconnected=True)
    assert graph_distance(g, 0, 3) == INF
    assert math.isinf(graph_distance(g, 0, 3))


def test_edge_distance_examples():
    g = build_graph("path", size=6)
    assert edge_distance(g, (1, 0), (5, 4)) == 5
    # an edge against itself spreads over both endpoints
    assert edge_distance(g, (2, 3), (2, 3)) == 1
    assert edge_distance(g, (2, 3), (3, 2)) == 1


def test_balls_and_spheres():
    g = build_graph("cycle", size=8)
    assert ball_vertices(g, 0, 2) == [0, 1, 2, 6, 7]
    assert sphere_vertices(g, 0, 2) == [2, 6]
    assert ball_vertices(g, 0, 0) == [0]


@pytest.mark.parametrize("spec,root", [
    ({"kind": "cycle", "size": 17}, 3),
    ({"kind": "torus_grid", "rows": 4, "cols": 5}, 7),
    ({"kind": "tree", "branching": 3, "depth": 3}, 0),
    ({"kind": "complete", "size": 6}, 2),
])
def test_sphere_growth_bound(spec, root):
    g = build_graph(spec)
    d = g.max_degree
    ecc = max(x for x in distances_from(g, root) if not math.isinf(x))
    for n in range(1, int(ecc) + 1):
        assert len(sphere_vertices(g, root, n)) <= d * (d - 1) ** (n - 1)


def test_edge_ball_example_and_monotonicity():
    g = build_graph("cycle", size=8)
    f2 = edge_ball(g, 0, 2)
    assert len(f2) == 8
    assert (0, 1) in f2 and (1, 0) in f2
    assert (2, 3) not in f2
    sizes = [len(edge_ball(g, 0, r)) for r in range(5)]
    assert sizes == sorted(sizes)
    assert sizes[-1] == g.edge_count  # radius reaches the diameter


def test_consistent_subset_complement_partition():
    g = build_graph("torus_grid", rows=3, cols=3)
    f = edge_ball(g, 4, 1)
    fc = f.complement()
    assert len(f) + len(fc) == g.edge_count
    assert set(f.edges).isdisjoint(fc.edges)
    # boundary of the ball is incident to edges on both sides
    for x in f.boundary_vertices():
        assert 0 < len(f.neighbors_within(x)) < g.degrees[x]
    for x in f.interior_vertices():
        assert len(f.neighbors_within(x)) == g.degrees[x]


def test_consistent_subset_rejects_unpaired():
    g = build_graph("cycle", size=5)
    members = {(0, 1)}
    with pytest.raises(ValueError, match="reversal"):
        ConsistentSubset(g, members)


def test_neighbor_validation():
    from sqwlab.graphs import Digraph
    with pytest.raises(ValueError, match="self-loop"):
        Digraph([[0, 1], [0]])
    with pytest.raises(ValueError, match="ascending"):
        Digraph([[1, 1], [0]])
    with pytest.raises(ValueError, match="isolated"):
        Digraph([[1], [0], []])
    with pytest.raises(ValueError, match="reversed partner"):
        Digraph([[1], [0, 2], [3], [2]])
