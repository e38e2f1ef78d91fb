"""Lifting of graph functions to an interval along an Euler tour.

A function supported in a ball is carried to an interval in four steps:
the vertices outside the ball are merged into one vertex V_OUT, odd degrees
are fixed by duplicating the edges of a T-join, an Euler tour starting at
V_OUT is extracted, and the function is read off along the tour. Every
original edge is traversed at most twice, so the L1 and L2 norms and the
energy at most double.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import networkx as nx  # type: ignore
import numpy as np

from tileheat.checks import CheckRecord
from tileheat.functions import (GraphFunction, PLIntegrals, dirichlet_energy,
                                interval_integrals)
from tileheat.global_helpers import setting
from tileheat.logger import logger
from tileheat.skeleton import BallSubgraph, ball_subgraph, vertex_distances

V_OUT = -1


class SupportError(ValueError):
    """Function support reaches the window boundary or the ball's outside."""


class LiftError(RuntimeError):
    """The lifted function is discontinuous or an edge is used too often."""


@dataclass(frozen=True)
class MultiEdge:
    """Edge of a multigraph with a reference to its graph edge.

    u and v keep the orientation of the graph edge, so that offsets along
    the graph edge run from u to v.
    """

    edge_id: int
    u: int
    v: int
    length: float
    origin: int
    duplicate_of: Optional[int] = None


class TourStep(NamedTuple):
    edge_id: int
    forward: bool


class MultiGraph:
    """Undirected multigraph without loops.

    Properties:
        vertices: sorted vertex ids, V_OUT first if present
        edges: MultiEdge records, edges[i].edge_id == i

    Public methods:
        degree(v), incident(v), odd_vertices(), is_connected(),
        with_duplicates(edge_ids)
    """

    def __init__(self, vertices: Sequence[int], edges: Sequence[MultiEdge]) -> None:
        self.__vertices = tuple(sorted(set(vertices)))
        self.__edges = tuple(edges)
        known = set(self.__vertices)
        incidence: Dict[int, List[int]] = {vertex: [] for vertex in self.__vertices}
        for index, edge in enumerate(self.__edges):
            if edge.edge_id != index:
                raise ValueError(f"edge {edge.edge_id} stored at position {index}")
            if edge.u == edge.v:
                raise ValueError(f"edge {index} is a loop")
            if edge.u not in known or edge.v not in known:
                raise ValueError(f"edge {index} has an unknown endpoint")
            incidence[edge.u].append(index)
            incidence[edge.v].append(index)
        self.__incidence = {vertex: tuple(ids) for vertex, ids in incidence.items()}

    @property
    def vertices(self) -> Tuple[int, ...]:
        return self.__vertices

    @property
    def edges(self) -> Tuple[MultiEdge, ...]:
        return self.__edges

    def incident(self, vertex: int) -> Tuple[int, ...]:
        return self.__incidence[vertex]

    def degree(self, vertex: int) -> int:
        return len(self.__incidence[vertex])

    def odd_vertices(self) -> List[int]:
        return [vertex for vertex in self.__vertices if self.degree(vertex) % 2]

    def is_connected(self) -> bool:
        graph = nx.MultiGraph()
        graph.add_nodes_from(self.__vertices)
        graph.add_edges_from((edge.u, edge.v) for edge in self.__edges)
        return len(self.__vertices) > 0 and nx.is_connected(graph)

    def with_duplicates(self, edge_ids: Sequence[int]) -> "MultiGraph":
        """Multigraph with one extra copy of each listed edge."""
        edges = list(self.__edges)
        for original in edge_ids:
            edge = self.__edges[original]
            edges.append(
                MultiEdge(len(edges), edge.u, edge.v, edge.length, edge.origin, original)
            )
        return MultiGraph(self.__vertices, edges)


def collapse_outer(ball: BallSubgraph) -> MultiGraph:
    """Merge the outer vertices of a ball into V_OUT.

    Edges between two outer vertices become loops and are dropped.

    Raises:
        SupportError: the ball has no outer vertices
    """
    if not ball.v_out:
        raise SupportError("support touches window boundary")
    outer = set(ball.v_out)
    graph = ball.graph
    edges: List[MultiEdge] = []
    for edge in ball.edges:
        u, v = (int(w) for w in graph.edges[edge])
        u, v = (V_OUT if u in outer else u), (V_OUT if v in outer else v)
        if u == v:
            continue
        edges.append(MultiEdge(len(edges), u, v, float(graph.lengths[edge]), edge))
    return MultiGraph([V_OUT, *ball.v_in], edges)


def evenize(multigraph: MultiGraph) -> Tuple[MultiGraph, Tuple[int, ...]]:
    """Duplicate the edges of a T-join of the odd degree vertices.

    Odd vertices are paired greedily, the lowest id with its nearest
    partner, and joined by shortest paths. The symmetric difference of the
    paths is the T-join, so no edge is duplicated twice.

    Raises:
        ValueError: the multigraph is not connected
    """
    odd = multigraph.odd_vertices()
    if not odd:
        return multigraph, ()
    if not multigraph.is_connected():
        raise ValueError("cannot evenize a disconnected multigraph")
    simple = nx.Graph()
    simple.add_nodes_from(multigraph.vertices)
    for edge in multigraph.edges:
        if not simple.has_edge(edge.u, edge.v) or edge.length < simple.edges[edge.u, edge.v]["weight"]:
            simple.add_edge(edge.u, edge.v, weight=edge.length, edge=edge.edge_id)
    pending = list(odd)
    join: set = set()
    while pending:
        source = pending.pop(0)
        distances, paths = nx.single_source_dijkstra(simple, source, weight="weight")
        target = min(pending, key=lambda vertex: (distances[vertex], vertex))
        pending.remove(target)
        path = paths[target]
        for a, b in zip(path[:-1], path[1:]):
            join ^= {simple.edges[a, b]["edge"]}
    duplicated = tuple(sorted(join))
    logger().debug("Evenized %d odd vertices with %d duplicates", len(odd), len(duplicated))
    return multigraph.with_duplicates(duplicated), duplicated


def euler_tour(multigraph: MultiGraph, start: int = V_OUT) -> Tuple[TourStep, ...]:
    """Closed walk from start through every edge exactly once.

    Edges enter the networkx multigraph in ascending id order, which fixes
    the walk for a given multigraph.

    Raises:
        ValueError: odd degree, unknown start or disconnected edges
    """
    odd = multigraph.odd_vertices()
    if odd:
        raise ValueError(f"odd degree at vertices {odd}")
    if start not in multigraph.vertices:
        raise ValueError(f"start vertex {start} not in multigraph")
    edges = multigraph.edges
    if not edges:
        return ()
    graph = nx.MultiGraph()
    for edge in edges:
        graph.add_edge(edge.u, edge.v, key=edge.edge_id)
    if start not in graph or not nx.is_connected(graph):
        raise ValueError("multigraph is not connected")
    return tuple(
        TourStep(key, edges[key].u == tail)
        for tail, _, key in nx.eulerian_circuit(graph, source=start, keys=True)
    )


@dataclass(frozen=True)
class TourLift:
    """Function on the interval (0, length) read off along a tour."""

    steps: Tuple[TourStep, ...]
    offsets: Tuple[float, ...]
    length: float
    positions: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    edge_uses: Dict[int, int] = field(default_factory=dict)

    @property
    def integrals(self) -> PLIntegrals:
        return interval_integrals(self.positions, self.values)

    @property
    def max_edge_use(self) -> int:
        return max(self.edge_uses.values(), default=0)


def lift_function(f: GraphFunction, multigraph: MultiGraph, tour: Sequence[TourStep]) -> TourLift:
    """Concatenate the values of f along the tour.

    A duplicated edge carries the values of its original edge.

    Raises:
        LiftError: consecutive pieces do not match
        SupportError: f does not vanish at the ends of the tour
    """
    mesh = f.mesh
    scale = max(1.0, float(np.max(np.abs(f.values)))) if f.values.size else 1.0
    positions: List[np.ndarray] = []
    values: List[np.ndarray] = []
    offsets: List[float] = []
    start = 0.0
    for step in tour:
        edge = multigraph.edges[step.edge_id]
        piece_offsets = mesh.edge_offsets(edge.origin)
        piece_values = f.edge_values(edge.origin)
        if not step.forward:
            piece_offsets = piece_offsets[-1] - piece_offsets[::-1]
            piece_values = piece_values[::-1]
        if values and abs(values[-1][-1] - piece_values[0]) > 1e-12 * scale:
            raise LiftError(f"lift jumps at the start of tour step {len(offsets)}")
        skip = 1 if values else 0
        positions.append(start + piece_offsets[skip:])
        values.append(piece_values[skip:])
        offsets.append(start)
        start += edge.length
    if not values:
        return TourLift(tuple(tour), (), 0.0, np.zeros(1), np.zeros(1))
    all_values = np.concatenate(values)
    if max(abs(all_values[0]), abs(all_values[-1])) > 1e-12 * scale:
        raise SupportError("function does not vanish at the outer vertex")
    uses = Counter(multigraph.edges[step.edge_id].origin for step in tour)
    return TourLift(
        tuple(tour),
        tuple(offsets),
        start,
        np.concatenate(positions),
        all_values,
        dict(sorted(uses.items())),
    )


@dataclass(frozen=True)
class LiftReport:
    """Nash inequality in dimension one checked through the lift.

    ratio is ||f||_2^6 / (Q(f) ||f||_1^4) on the graph and lift_bound the
    constant 2^5 alpha_1 the construction guarantees. interval_ratio is the
    same functional for the lifted function.
    """

    record: CheckRecord
    ratio: Optional[float]
    lift_bound: float
    interval_ratio: Optional[float]
    graph_integrals: Tuple[float, float, float]
    lift_integrals: Tuple[float, float, float]
    max_edge_use: int
    duplicated: int
    center: Optional[int] = None
    radius: Optional[float] = None

    @property
    def degenerate(self) -> bool:
        return self.ratio is None

    @property
    def within_lift_bound(self) -> bool:
        return self.ratio is None or self.ratio <= self.lift_bound * (1.0 + self.record.tolerance)

    @property
    def doubling_factors(self) -> Tuple[float, float, float]:
        """Lifted over graph values of L1 norm, squared L2 norm and energy."""
        return tuple(  # type: ignore
            lifted / base if base > 0.0 else 0.0
            for lifted, base in zip(self.lift_integrals, self.graph_integrals)
        )


def _center_vertex(f: GraphFunction) -> int:
    mesh = f.mesh
    node = int(np.argmax(f.values))
    if node < f.graph.n_vertices:
        return node
    edge = int(mesh.node_edge[node])
    u, v = (int(w) for w in f.graph.edges[edge])
    return u if mesh.node_offset[node] <= 0.5 * f.graph.lengths[edge] else v


def _support_ball(f: GraphFunction) -> Tuple[int, float]:
    """Vertex nearest to the maximum of f whose ball around the support of f
    stays clear of the window boundary, and the radius of that ball.

    Falls back to the ball around the maximum if no vertex qualifies.
    """
    graph, mesh = f.graph, f.mesh
    support = f.values > 0.0
    pad = 0.5 * mesh.min_segment
    start = _center_vertex(f)
    order = vertex_distances(graph, start)
    clearance = graph.boundary_vertex_distances
    start_radius = float(mesh.node_distances(start)[support].max()) + pad
    longest = float(graph.lengths.max())
    for vertex in np.argsort(order, kind="stable"):
        distance = order[vertex]
        if distance - longest > clearance.max():
            break
        # lower bound of the support radius around vertex
        if clearance[vertex] < max(start_radius - pad - distance, distance - longest) + pad:
            continue
        cutoff = clearance[vertex] if np.isfinite(clearance[vertex]) else None
        radius = float(mesh.node_distances(int(vertex), cutoff)[support].max()) + pad
        if radius <= clearance[vertex]:
            return int(vertex), radius
    return start, start_radius


def nash1_via_lift(
    f: GraphFunction, center: Optional[int] = None, radius: Optional[float] = None
) -> LiftReport:
    """Check ||f||_2^6 <= beta_1 Q(f) ||f||_1^4 along the Euler tour lift.

    Without center and radius the ball is centered at the vertex nearest to
    the maximum of f that lets a ball just containing the support of f stay
    clear of the window boundary.

    Raises:
        SupportError: the support reaches the window boundary
        LiftError: an original edge is used more than twice
    """
    beta1 = setting("nash.beta1")
    lift_bound = 2.0**5 * setting("nash.alpha1")
    base = f.integrals
    energy = dirichlet_energy(f)
    graph_integrals = (base.l1, base.l2sq, energy)
    if base.l1 == 0.0 or energy == 0.0:
        record = CheckRecord("nash1_lift", 0.0, 0.0, metadata={"degenerate": "zero norm or energy"})
        return LiftReport(record, None, lift_bound, None, graph_integrals, (0.0, 0.0, 0.0), 0, 0)
    if np.any(f.values < 0.0):
        raise ValueError("nash1_via_lift needs a nonnegative function")
    if center is None and radius is None:
        center, radius = _support_ball(f)
    elif center is None:
        center = _center_vertex(f)
    elif radius is None:
        support = f.values > 0.0
        radius = float(f.mesh.node_distances(center)[support].max()) + 0.5 * f.mesh.min_segment
    ball = ball_subgraph(f.graph, center, radius)
    if ball.exceeds_window:
        raise SupportError("support touches window boundary")
    multigraph = collapse_outer(ball)
    evenized, duplicated = evenize(multigraph)
    tour = euler_tour(evenized)
    lift = lift_function(f, evenized, tour)
    if lift.max_edge_use > 2:
        raise LiftError(f"an edge is used {lift.max_edge_use} times")
    lifted = lift.integrals
    lift_integrals = (lifted.l1, lifted.l2sq, lifted.energy)
    lhs = base.l2sq**3
    ratio = lhs / (energy * base.l1**4)
    interval_ratio = lifted.l2sq**3 / (lifted.energy * lifted.l1**4)
    record = CheckRecord(
        "nash1_lift",
        lhs=lhs,
        rhs=beta1 * energy * base.l1**4,
        metadata={
            "ratio": ratio,
            "lift_bound": lift_bound,
            "interval_ratio": interval_ratio,
            "max_edge_use": lift.max_edge_use,
            "duplicated": len(duplicated),
        },
    )
    logger().debug("Lift of length %g, ratio %g", lift.length, ratio)
    return LiftReport(
        record,
        ratio,
        lift_bound,
        interval_ratio,
        graph_integrals,
        lift_integrals,
        lift.max_edge_use,
        len(duplicated),
        center,
        radius,
    )
