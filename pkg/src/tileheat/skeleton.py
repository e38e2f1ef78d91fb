"""One-skeleton of a tiling as a metric graph.

Vertices are the branching points of the tiling, edges the straight pieces
of polygon sides between them. Corners of a polygon lying on a side of a
neighbour split that side.
"""

import json
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx  # type: ignore
import numpy as np

from tileheat.geometry import (Tiling, TilingConstants, corner_points,
                               load_tiling, point_tolerance, side_chains,
                               tiling_to_dict)
from tileheat.global_helpers import write_atomic
from tileheat.logger import logger
from tileheat.typedef import SCHEMA_VERSION, GraphDict

# one side of a polygon: chain of (edge id, traversed from u to v)
Side = Tuple[Tuple[int, bool], ...]


class SkeletonError(ValueError):
    """Invalid graph, unknown edge or point, or empty ball."""


@dataclass(frozen=True)
class GraphPoint:
    """Point on an edge, offset measured from the first endpoint u."""

    edge: int
    offset: float


class MetricGraph:
    """Metric graph embedded in the plane.

    Edges are straight segments; edges[e] = (u, v) with u < v and the
    length of e is the Euclidean distance of its endpoints.

    Properties:
        points: (V, 2) vertex coordinates
        edges: (E, 2) endpoint ids
        lengths: (E,) edge lengths
        boundary: (V,) flags of vertices on the window boundary
        faces: per polygon the tuple of its sides, every side a chain of
            (edge, forward) pairs, counterclockwise
        tiling: source tiling or None
        nx_graph: networkx view with edge weights

    Public methods:
        incident_edges(v), other_end(e, v), edge_between(u, v),
        check_point(point), point_coordinates(point), vertex_point(v),
        nearest_vertex(xy)
    """

    def __init__(
        self,
        points: Any,
        edges: Any,
        boundary: Any = None,
        faces: Sequence[Sequence[Side]] = (),
        tiling: Optional[Tiling] = None,
    ) -> None:
        points = np.array(points, dtype=float).reshape(-1, 2)
        edges = np.array(edges, dtype=int).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= len(points)):
            raise SkeletonError("edge endpoint is not a vertex")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise SkeletonError("loops are not allowed")
        edges = np.sort(edges, axis=1)
        if len({tuple(edge) for edge in edges}) != len(edges):
            raise SkeletonError("parallel edges are not allowed")
        lengths = np.hypot(*(points[edges[:, 1]] - points[edges[:, 0]]).T)
        if np.any(lengths <= 0.0):
            raise SkeletonError("edge of zero length")
        if boundary is None:
            boundary = np.zeros(len(points), dtype=bool)
        boundary = np.array(boundary, dtype=bool)
        for array in (points, edges, lengths, boundary):
            array.setflags(write=False)
        self.__points = points
        self.__edges = edges
        self.__lengths = lengths
        self.__boundary = boundary
        self.__faces = tuple(
            tuple(tuple((int(e), bool(forward)) for e, forward in side) for side in face)
            for face in faces
        )
        self.__tiling = tiling
        incidence: List[List[int]] = [[] for _ in range(len(points))]
        for edge_id, (u, v) in enumerate(edges):
            incidence[u].append(edge_id)
            incidence[v].append(edge_id)
        self.__incidence = tuple(tuple(sorted(ids)) for ids in incidence)

    @classmethod
    def from_edges(cls, points: Any, edges: Any, boundary: Any = None) -> "MetricGraph":
        """Graph without faces, e.g. a single long edge.

        Without explicit flags every vertex of degree 1 is a boundary vertex.
        """
        if boundary is None:
            counts = np.bincount(np.asarray(edges, dtype=int).ravel(), minlength=len(points))
            boundary = counts == 1
        return cls(points, edges, boundary)

    @property
    def points(self) -> np.ndarray:
        """Return vertex coordinates."""
        return self.__points

    @property
    def edges(self) -> np.ndarray:
        """Return endpoint ids per edge."""
        return self.__edges

    @property
    def lengths(self) -> np.ndarray:
        """Return edge lengths."""
        return self.__lengths

    @property
    def boundary(self) -> np.ndarray:
        """Return boundary flags of the vertices."""
        return self.__boundary

    @property
    def faces(self) -> Tuple[Tuple[Side, ...], ...]:
        """Return the boundary chains of the polygons."""
        return self.__faces

    @property
    def tiling(self) -> Optional[Tiling]:
        """Return the tiling the graph was built from."""
        return self.__tiling

    @property
    def n_vertices(self) -> int:
        return len(self.__points)

    @property
    def n_edges(self) -> int:
        return len(self.__edges)

    @property
    def total_length(self) -> float:
        return float(self.__lengths.sum())

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(ids) for ids in self.__incidence], dtype=int)

    @property
    def cell_diameter(self) -> float:
        """Largest polygon diameter, or largest edge without faces."""
        if self.__tiling is not None:
            return self.__tiling.cell_diameter
        return float(self.__lengths.max())

    @property
    def constants(self) -> TilingConstants:
        """Tiling constants with d_max filled in."""
        if self.__tiling is None:
            raise SkeletonError("graph has no tiling")
        return self.__tiling.constants

    @cached_property
    def nx_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_vertices))
        for edge_id, (u, v) in enumerate(self.__edges):
            graph.add_edge(int(u), int(v), weight=float(self.__lengths[edge_id]), id=edge_id)
        return graph

    @cached_property
    def boundary_vertex_distances(self) -> np.ndarray:
        """Graph distance of every vertex to the nearest boundary vertex."""
        sources = [int(v) for v in np.flatnonzero(self.__boundary)]
        result = np.full(self.n_vertices, np.inf)
        if sources:
            lengths = nx.multi_source_dijkstra_path_length(self.nx_graph, sources)
            for vertex, distance in lengths.items():
                result[vertex] = distance
        return result

    def incident_edges(self, vertex: int) -> Tuple[int, ...]:
        """Ids of the edges at a vertex, ascending."""
        return self.__incidence[vertex]

    def other_end(self, edge: int, vertex: int) -> int:
        u, v = self.__edges[edge]
        return int(v if u == vertex else u)

    def edge_between(self, u: int, v: int) -> Optional[int]:
        if self.nx_graph.has_edge(u, v):
            return int(self.nx_graph.edges[u, v]["id"])
        return None

    def check_point(self, point: GraphPoint) -> None:
        """Raise SkeletonError unless point lies on the graph."""
        if not 0 <= point.edge < self.n_edges:
            raise SkeletonError(f"unknown edge id {point.edge}")
        length = self.__lengths[point.edge]
        if not -1e-12 * length <= point.offset <= length * (1.0 + 1e-12):
            raise SkeletonError(
                f"offset {point.offset} outside edge {point.edge} of length {length}"
            )

    def point_coordinates(self, point: GraphPoint) -> np.ndarray:
        """Plane coordinates of a graph point."""
        self.check_point(point)
        u, v = self.__edges[point.edge]
        weight = point.offset / self.__lengths[point.edge]
        return (1.0 - weight) * self.__points[u] + weight * self.__points[v]

    def vertex_point(self, vertex: int) -> GraphPoint:
        """Graph point of a vertex on its first incident edge."""
        edge = self.__incidence[vertex][0]
        offset = 0.0 if self.__edges[edge][0] == vertex else float(self.__lengths[edge])
        return GraphPoint(edge, offset)

    def midpoint(self, edge: int) -> GraphPoint:
        return GraphPoint(edge, 0.5 * float(self.__lengths[edge]))

    def nearest_vertex(self, xy: Sequence[float]) -> int:
        """Vertex closest to a plane point, lowest id on ties."""
        distances = np.hypot(*(self.__points - np.asarray(xy, dtype=float)).T)
        return int(np.argmin(distances))


def build_skeleton(tiling: Tiling) -> MetricGraph:
    """Metric graph of the polygon boundaries of a tiling.

    Polygon corners closer than 1e-9 l_min are merged. A corner lying on the
    side of another polygon splits that side. Edges on exactly one polygon
    lie on the window boundary and so do their endpoints.

    Raises:
        SkeletonError: the skeleton is not connected
    """
    polygons = tiling.polygons
    tol = min(point_tolerance(polygons), 1e-9 * tiling.constants.l_min)
    points, corner_ids = corner_points(polygons, tol)
    chains = side_chains(points, corner_ids, tol)
    edge_ids: Dict[Tuple[int, int], int] = {}
    owners: List[int] = []
    faces = []
    for polygon_chains in chains:
        face = []
        for chain in polygon_chains:
            side = []
            for a, b in zip(chain[:-1], chain[1:]):
                key = (min(a, b), max(a, b))
                if key not in edge_ids:
                    edge_ids[key] = len(owners)
                    owners.append(0)
                owners[edge_ids[key]] += 1
                side.append((edge_ids[key], a < b))
            face.append(tuple(side))
        faces.append(tuple(face))
    edges = sorted(edge_ids, key=edge_ids.get)
    boundary = np.zeros(len(points), dtype=bool)
    for (u, v), count in zip(edges, owners):
        if count == 1:
            boundary[u] = boundary[v] = True
    d_max = int(np.bincount(np.ravel(edges)).max())
    tiling = replace(tiling, constants=replace(tiling.constants, d_max=d_max))
    graph = MetricGraph(points, edges, boundary, faces, tiling)
    if not nx.is_connected(graph.nx_graph):
        raise SkeletonError("skeleton of the tiling is not connected")
    low = np.flatnonzero((graph.degrees < 3) & ~boundary)
    if low.size:
        logger().warning("%d interior vertices have degree < 3, first %d", low.size, low[0])
    logger().debug(
        "Skeleton with %d vertices, %d edges, %d on the boundary",
        graph.n_vertices,
        graph.n_edges,
        int(boundary.sum()),
    )
    return graph


def _as_source(graph: MetricGraph, source: Union[int, GraphPoint]) -> GraphPoint:
    if isinstance(source, GraphPoint):
        graph.check_point(source)
        return source
    if not 0 <= int(source) < graph.n_vertices:
        raise SkeletonError(f"unknown vertex id {source}")
    return graph.vertex_point(int(source))


def _dijkstra(graph: MetricGraph, vertex: int, cutoff: Optional[float]) -> np.ndarray:
    result = np.full(graph.n_vertices, np.inf)
    lengths = nx.single_source_dijkstra_path_length(graph.nx_graph, vertex, cutoff=cutoff)
    for other, distance in lengths.items():
        result[other] = distance
    return result


def vertex_distances(
    graph: MetricGraph, source: Union[int, GraphPoint], cutoff: Optional[float] = None
) -> np.ndarray:
    """Graph distance from a vertex or graph point to every vertex.

    Vertices farther than cutoff get inf.
    """
    if not isinstance(source, GraphPoint):
        if not 0 <= int(source) < graph.n_vertices:
            raise SkeletonError(f"unknown vertex id {source}")
        return _dijkstra(graph, int(source), cutoff)
    graph.check_point(source)
    u, v = graph.edges[source.edge]
    length = graph.lengths[source.edge]
    result = np.minimum(
        source.offset + _dijkstra(graph, int(u), cutoff),
        length - source.offset + _dijkstra(graph, int(v), cutoff),
    )
    if cutoff is not None:
        result[result > cutoff] = np.inf
    return result


def graph_distance(graph: MetricGraph, a: GraphPoint, b: GraphPoint) -> float:
    """Length of a shortest path between two graph points."""
    graph.check_point(b)
    distances = vertex_distances(graph, a)
    u, v = graph.edges[b.edge]
    best = min(
        distances[u] + b.offset, distances[v] + graph.lengths[b.edge] - b.offset
    )
    if a.edge == b.edge:
        best = min(best, abs(a.offset - b.offset))
    return float(best)


def boundary_distance(graph: MetricGraph, source: Union[int, GraphPoint]) -> float:
    """Graph distance to the nearest boundary vertex (inf without boundary)."""
    point = _as_source(graph, source)
    u, v = graph.edges[point.edge]
    return float(
        min(
            point.offset + graph.boundary_vertex_distances[u],
            graph.lengths[point.edge] - point.offset + graph.boundary_vertex_distances[v],
        )
    )


@dataclass(frozen=True)
class BallSubgraph:
    """Vertices within distance < radius of a center and their neighbours.

    edges are all edges with an endpoint in v_in; every other endpoint of
    those edges is in v_out. exceeds_window is set if the ball reaches the
    window boundary.
    """

    graph: MetricGraph
    center: int
    radius: float
    v_in: Tuple[int, ...]
    v_out: Tuple[int, ...]
    edges: Tuple[int, ...]
    exceeds_window: bool


def ball_subgraph(graph: MetricGraph, v0: int, radius: float) -> BallSubgraph:
    """Ball of a radius around a vertex.

    Raises:
        SkeletonError: radius <= 0 or unknown vertex
    """
    if not radius > 0.0:
        raise SkeletonError(f"empty ball: radius {radius} is not positive")
    distances = vertex_distances(graph, v0)
    inside = distances < radius
    v_in = tuple(int(v) for v in np.flatnonzero(inside))
    edges = tuple(
        int(e) for e in np.flatnonzero(inside[graph.edges[:, 0]] | inside[graph.edges[:, 1]])
    )
    v_out = tuple(sorted({int(w) for e in edges for w in graph.edges[e] if not inside[w]}))
    exceeds = not v_out or bool(np.any(graph.boundary[list(v_in)]))
    if exceeds:
        logger().info("Ball of radius %g around vertex %d exceeds window", radius, v0)
    return BallSubgraph(graph, v0, float(radius), v_in, v_out, edges, exceeds)


def graph_to_dict(graph: MetricGraph) -> GraphDict:
    """Graph document of a metric graph."""
    document: GraphDict = {
        "schema_version": SCHEMA_VERSION,
        "vertices": [
            {"id": i, "x": float(x), "y": float(y), "boundary": bool(graph.boundary[i])}
            for i, (x, y) in enumerate(graph.points)
        ],
        "edges": [
            {"id": e, "u": int(u), "v": int(v), "length": float(graph.lengths[e])}
            for e, (u, v) in enumerate(graph.edges)
        ],
        "faces": [[[[e, forward] for e, forward in side] for side in face] for face in graph.faces],
    }
    if graph.tiling is not None:
        document["tiling_id"] = graph.tiling.tiling_id
        document["constants"] = graph.constants.as_dict()
        document["tiling"] = tiling_to_dict(graph.tiling)
    return document


def graph_from_dict(document: Mapping[str, Any]) -> MetricGraph:
    """Metric graph from a graph document.

    Raises:
        SkeletonError: stored lengths disagree with the vertex coordinates
    """
    try:
        vertices = sorted(document["vertices"], key=lambda vertex: vertex["id"])
        edges = sorted(document["edges"], key=lambda edge: edge["id"])
        points = [[vertex["x"], vertex["y"]] for vertex in vertices]
        boundary = [bool(vertex.get("boundary", False)) for vertex in vertices]
        pairs = [[edge["u"], edge["v"]] for edge in edges]
    except (KeyError, TypeError) as exception:
        raise SkeletonError(f"malformed graph document: {exception}") from exception
    tiling = None
    if document.get("tiling"):
        tiling = load_tiling(document["tiling"])
        d_max = (document.get("constants") or {}).get("d_max")
        if d_max is not None:
            tiling = replace(tiling, constants=replace(tiling.constants, d_max=int(d_max)))
    faces = [[[(e, forward) for e, forward in side] for side in face] for face in document.get("faces", [])]
    graph = MetricGraph(points, pairs, boundary, faces, tiling)
    stored = np.array([edge["length"] for edge in edges], dtype=float)
    if not np.allclose(stored, graph.lengths, rtol=1e-9, atol=0.0):
        raise SkeletonError("edge lengths disagree with vertex coordinates")
    return graph


def load_graph(path: str) -> MetricGraph:
    """Read a graph document written by save_graph."""
    with open(path, "r", encoding="utf-8") as __f:
        return graph_from_dict(json.load(__f))


def save_graph(graph: MetricGraph, path: str) -> None:
    """Write the graph document as JSON."""
    write_atomic(path, json.dumps(graph_to_dict(graph), sort_keys=True, indent=1) + "\n")
