"""Euler tour lift of graph functions to an interval"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tileheat.euler_lift import (V_OUT, MultiEdge, MultiGraph, SupportError,
                                 collapse_outer, euler_tour, evenize,
                                 lift_function, nash1_via_lift)
from tileheat.functions import (GraphFunction, Mesh, hat_function,
                                random_test_function)
from tileheat.global_helpers import setting
from tileheat.skeleton import BallSubgraph, MetricGraph, ball_subgraph


def _multigraph(vertices, pairs):
    return MultiGraph(
        vertices, [MultiEdge(i, u, v, 1.0, i) for i, (u, v) in enumerate(pairs)]
    )


def _check_closed_walk(multigraph, tour, start=V_OUT):
    assert sorted(step.edge_id for step in tour) == list(range(len(multigraph.edges)))
    position = start
    for step in tour:
        edge = multigraph.edges[step.edge_id]
        tail, head = (edge.u, edge.v) if step.forward else (edge.v, edge.u)
        assert tail == position
        position = head
    assert position == start


def _interior_edge(graph, a, b):
    return graph.edge_between(graph.nearest_vertex(a), graph.nearest_vertex(b))


def test_collapse_ball(grid4):
    center = grid4.nearest_vertex((2.0, 2.0))
    multigraph = collapse_outer(ball_subgraph(grid4, center, 1.5))
    assert len(multigraph.vertices) == 6
    assert multigraph.degree(V_OUT) == 12
    assert multigraph.degree(center) == 4
    assert multigraph.is_connected()


def test_collapse_star(grid4):
    center = grid4.nearest_vertex((2.0, 2.0))
    multigraph = collapse_outer(ball_subgraph(grid4, center, 0.5))
    assert multigraph.vertices == (V_OUT, center)
    assert len(multigraph.edges) == 4


def test_collapse_drops_outer_edges():
    graph = MetricGraph.from_edges([[0, 0], [1, 0], [0, 1]], [[0, 1], [0, 2], [1, 2]])
    ball = BallSubgraph(graph, 0, 1.0, (0,), (1, 2), (0, 1, 2), False)
    multigraph = collapse_outer(ball)
    assert len(multigraph.edges) == 2
    assert {edge.origin for edge in multigraph.edges} == {0, 1}


def test_collapse_without_outside():
    graph = MetricGraph.from_edges([[0, 0], [1, 0]], [[0, 1]])
    with pytest.raises(SupportError):
        collapse_outer(BallSubgraph(graph, 0, 5.0, (0, 1), (), (0,), True))


def test_evenize_even_graph():
    multigraph = _multigraph([0, 1, 2, 3], [(0, 1), (1, 2), (2, 3), (3, 0)])
    evenized, duplicated = evenize(multigraph)
    assert duplicated == ()
    assert evenized is multigraph


def test_evenize_path():
    evenized, duplicated = evenize(_multigraph([0, 1, 2], [(0, 1), (1, 2)]))
    assert duplicated == (0, 1)
    assert evenized.odd_vertices() == []


def test_evenize_star_duplicates_every_leaf_edge():
    evenized, duplicated = evenize(_multigraph([0, 1, 2, 3], [(0, 1), (0, 2), (0, 3)]))
    assert duplicated == (0, 1, 2)
    assert evenized.odd_vertices() == []
    assert evenized.edges[3].duplicate_of == 0


def test_evenize_disconnected():
    with pytest.raises(ValueError):
        evenize(_multigraph([0, 1, 2, 3], [(0, 1), (2, 3)]))


def test_tour_of_cycle():
    multigraph = _multigraph([V_OUT, 1, 2, 3], [(V_OUT, 1), (1, 2), (2, 3), (3, V_OUT)])
    tour = euler_tour(multigraph)
    assert len(tour) == 4
    _check_closed_walk(multigraph, tour)


def test_tour_of_bowtie():
    multigraph = _multigraph(
        [V_OUT, 1, 2, 3, 4], [(V_OUT, 1), (1, 2), (2, V_OUT), (V_OUT, 3), (3, 4), (4, V_OUT)]
    )
    tour = euler_tour(multigraph)
    _check_closed_walk(multigraph, tour)


def test_tour_needs_even_degrees():
    with pytest.raises(ValueError):
        euler_tour(_multigraph([V_OUT, 1], [(V_OUT, 1)]))


def test_tour_over_parallel_edges():
    multigraph = _multigraph([V_OUT, 1, 2], [(V_OUT, 1), (1, V_OUT), (V_OUT, 2), (2, V_OUT)])
    tour = euler_tour(multigraph)
    assert len(tour) == 4
    _check_closed_walk(multigraph, tour)


def test_tour_needs_connected_multigraph():
    multigraph = _multigraph([V_OUT, 1, 2, 3, 4], [(V_OUT, 1), (1, V_OUT), (2, 3), (3, 4), (4, 2)])
    with pytest.raises(ValueError):
        euler_tour(multigraph)


def test_tour_is_reproducible(regular_graphs):
    graph = regular_graphs["hexagonal"]
    evenized, _ = evenize(collapse_outer(ball_subgraph(graph, graph.nearest_vertex((5.0, 5.0)), 2.5)))
    assert euler_tour(evenized) == euler_tour(evenized)


def test_tour_through_evenized_ball(regular_graphs):
    for graph in regular_graphs.values():
        center = graph.nearest_vertex((5.0, 5.0))
        evenized, _ = evenize(collapse_outer(ball_subgraph(graph, center, 2.5)))
        _check_closed_walk(evenized, euler_tour(evenized))


def test_zero_function_lifts_to_zero(grid4):
    center = grid4.nearest_vertex((2.0, 2.0))
    evenized, _ = evenize(collapse_outer(ball_subgraph(grid4, center, 1.5)))
    lift = lift_function(GraphFunction.constant(Mesh(grid4), 0.0), evenized, euler_tour(evenized))
    assert np.all(lift.values == 0.0)
    assert lift.max_edge_use <= 2


def test_hat_lift_counts_edge_uses(grid4):
    mesh = Mesh(grid4)
    edge = _interior_edge(grid4, (2.0, 2.0), (2.0, 3.0))
    hat = hat_function(mesh, edge)
    evenized, _ = evenize(collapse_outer(ball_subgraph(grid4, grid4.nearest_vertex((2, 2)), 1.5)))
    lift = lift_function(hat, evenized, euler_tour(evenized))
    uses = lift.edge_uses[edge]
    assert uses in (1, 2)
    assert lift.integrals.l1 == pytest.approx(0.5 * uses)
    assert lift.integrals.energy == pytest.approx(4.0 * uses)


def test_constant_does_not_vanish_outside(grid4):
    center = grid4.nearest_vertex((2.0, 2.0))
    evenized, _ = evenize(collapse_outer(ball_subgraph(grid4, center, 1.5)))
    with pytest.raises(SupportError):
        lift_function(GraphFunction.constant(Mesh(grid4), 1.0), evenized, euler_tour(evenized))


def test_nash1_lift_of_hat(grid4):
    edge = _interior_edge(grid4, (2.0, 2.0), (2.0, 3.0))
    report = nash1_via_lift(hat_function(Mesh(grid4), edge))
    assert report.ratio == pytest.approx(4.0 / 27.0)
    assert report.record.ratio == pytest.approx(4.0 / 27.0 / 6.0)
    assert report.record.passed
    assert report.within_lift_bound
    assert report.max_edge_use <= 2


def test_nash1_lift_of_zero(grid4):
    report = nash1_via_lift(GraphFunction.constant(Mesh(grid4), 0.0))
    assert report.degenerate
    assert report.record.status == "degenerate"


def test_nash1_lift_rejects_boundary_support(grid4):
    edge = _interior_edge(grid4, (0.0, 0.0), (1.0, 0.0))
    with pytest.raises(SupportError):
        nash1_via_lift(hat_function(Mesh(grid4), edge))


def _check_lift(graphs, seed, x, y, radius):
    lift_bound = 2.0**5 * setting("nash.alpha1")
    for graph in graphs.values():
        center = graph.nearest_vertex((x, y))
        evenized, _ = evenize(collapse_outer(ball_subgraph(graph, center, radius)))
        assert evenized.odd_vertices() == []
        f = random_test_function(graph, seed, center, radius)
        report = nash1_via_lift(f, center, radius)
        assert report.max_edge_use <= 2
        assert all(1.0 - 1e-12 <= factor <= 2.0 + 1e-12 for factor in report.doubling_factors)
        assert report.within_lift_bound
        assert report.ratio <= lift_bound * (1.0 + 1e-9)
        assert report.record.passed
        assert report.interval_ratio <= setting("nash.alpha1") * (1.0 + 1e-9)


LIFT_BALLS = dict(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    x=st.floats(min_value=4.0, max_value=6.0),
    y=st.floats(min_value=4.0, max_value=6.0),
    radius=st.floats(min_value=0.75, max_value=1.8),
)


@given(**LIFT_BALLS)
def test_lift_doubles_at_most(regular_graphs, seed, x, y, radius):
    _check_lift(regular_graphs, seed, x, y, radius)


@pytest.mark.slow
@settings(settings.get_profile("acceptance"))
@given(**LIFT_BALLS)
def test_lift_acceptance(regular_graphs, seed, x, y, radius):
    _check_lift(regular_graphs, seed, x, y, radius)
