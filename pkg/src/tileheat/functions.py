"""Piecewise linear functions on metric graphs and on polygon boundaries.

All integrals are the exact integrals of the piecewise linear
interpolant, computed segment by segment in closed form.
"""

import csv
import io
import math
from typing import (Any, Callable, Iterator, Mapping, NamedTuple, Optional,
                    Sequence, Tuple, Union)

import numpy as np

from tileheat.checks import CheckRecord
from tileheat.geometry import Polygon
from tileheat.global_helpers import setting
from tileheat.logger import logger
from tileheat.skeleton import GraphPoint, MetricGraph, vertex_distances

Coefficient = Union[None, float, Sequence[float], np.ndarray, Callable[..., Any]]
RobinWeights = Union[None, float, Mapping[int, float], Sequence[float], np.ndarray]


class EllipticityError(ValueError):
    """Coefficient with non positive values."""


class StructureError(ValueError):
    """Polygon boundary not covered by graph edges."""


class PLIntegrals(NamedTuple):
    """Exact integrals of a piecewise linear function."""

    integral: float
    l1: float
    l2sq: float
    energy: float

    @property
    def l2(self) -> float:
        return math.sqrt(self.l2sq)


class Norms(NamedTuple):
    l1: float
    l2: float
    linf: float


def segment_integrals(p: np.ndarray, q: np.ndarray, h: np.ndarray) -> PLIntegrals:
    """Integrals of the linear interpolants of p to q over segments of length h."""
    p, q, h = (np.asarray(a, dtype=float) for a in (p, q, h))
    opposite = p * q < 0.0
    absolute = np.abs(p) + np.abs(q)
    crossing = np.divide(
        p * p + q * q, 2.0 * absolute, out=np.zeros_like(absolute), where=opposite
    )
    l1 = np.where(opposite, h * crossing, 0.5 * h * np.abs(p + q))
    return PLIntegrals(
        integral=float(np.sum(0.5 * h * (p + q))),
        l1=float(np.sum(l1)),
        l2sq=float(np.sum(h * (p * p + p * q + q * q) / 3.0)),
        energy=float(np.sum((q - p) ** 2 / h)),
    )


def interval_integrals(positions: Sequence[float], values: Sequence[float]) -> PLIntegrals:
    """Integrals of the piecewise linear function through (positions, values)."""
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(positions) < 2:
        return PLIntegrals(0.0, 0.0, 0.0, 0.0)
    steps = np.diff(positions)
    if np.any(steps <= 0.0):
        raise ValueError("positions must be strictly increasing")
    return segment_integrals(values[:-1], values[1:], steps)


class Mesh:
    """Uniform subdivision of every edge of a metric graph.

    Edge e is cut into n_e = ceil(l_e / mesh_size) segments of equal length.
    Nodes 0..V-1 are the graph vertices, the interior nodes of edge 0 follow,
    then those of edge 1 and so on, each in the direction from u to v.

    Properties:
        graph, mesh_size, n_nodes, subdivisions
        left, right, seg_h, seg_edge: per segment arrays
        node_edge, node_offset: edge and offset of every interior node
        lumped_mass: half the lengths of the adjacent segments per node
    """

    def __init__(self, graph: MetricGraph, mesh_size: Optional[float] = None) -> None:
        if mesh_size is None:
            mesh_size = default_mesh_size(graph)
        if not mesh_size > 0.0:
            raise ValueError(f"mesh size must be positive, got {mesh_size}")
        lengths = graph.lengths
        subdivisions = np.maximum(1, np.ceil(lengths / mesh_size - 1e-9).astype(int))
        n_vertices = graph.n_vertices
        first_inner = n_vertices + np.concatenate(([0], np.cumsum(subdivisions - 1)[:-1]))
        n_nodes = n_vertices + int(np.sum(subdivisions - 1))
        left, right, seg_h, seg_edge = [], [], [], []
        node_edge = np.full(n_nodes, -1, dtype=int)
        node_offset = np.zeros(n_nodes)
        for edge, (u, v) in enumerate(graph.edges):
            n = int(subdivisions[edge])
            inner = np.arange(first_inner[edge], first_inner[edge] + n - 1)
            nodes = np.concatenate(([u], inner, [v]))
            left.append(nodes[:-1])
            right.append(nodes[1:])
            seg_h.append(np.full(n, lengths[edge] / n))
            seg_edge.append(np.full(n, edge))
            node_edge[inner] = edge
            node_offset[inner] = np.arange(1, n) * lengths[edge] / n
        self.__graph = graph
        self.__mesh_size = float(mesh_size)
        self.__subdivisions = subdivisions
        self.__first_inner = first_inner
        self.__n_nodes = n_nodes
        self.__left = np.concatenate(left)
        self.__right = np.concatenate(right)
        self.__seg_h = np.concatenate(seg_h)
        self.__seg_edge = np.concatenate(seg_edge)
        self.__node_edge = node_edge
        self.__node_offset = node_offset
        self.__lumped_mass = 0.5 * (
            np.bincount(self.__left, self.__seg_h, minlength=n_nodes)
            + np.bincount(self.__right, self.__seg_h, minlength=n_nodes)
        )
        logger().debug("Mesh of size %g with %d nodes", mesh_size, n_nodes)

    @property
    def graph(self) -> MetricGraph:
        return self.__graph

    @property
    def mesh_size(self) -> float:
        return self.__mesh_size

    @property
    def n_nodes(self) -> int:
        return self.__n_nodes

    @property
    def subdivisions(self) -> np.ndarray:
        return self.__subdivisions

    @property
    def left(self) -> np.ndarray:
        return self.__left

    @property
    def right(self) -> np.ndarray:
        return self.__right

    @property
    def seg_h(self) -> np.ndarray:
        return self.__seg_h

    @property
    def seg_edge(self) -> np.ndarray:
        return self.__seg_edge

    @property
    def node_edge(self) -> np.ndarray:
        return self.__node_edge

    @property
    def node_offset(self) -> np.ndarray:
        return self.__node_offset

    @property
    def lumped_mass(self) -> np.ndarray:
        return self.__lumped_mass

    @property
    def min_segment(self) -> float:
        return float(self.__seg_h.min())

    @property
    def max_segment(self) -> float:
        return float(self.__seg_h.max())

    def edge_nodes(self, edge: int) -> np.ndarray:
        """Node ids along an edge from u to v, endpoints included."""
        u, v = self.__graph.edges[edge]
        start = self.__first_inner[edge]
        inner = np.arange(start, start + self.__subdivisions[edge] - 1)
        return np.concatenate(([u], inner, [v]))

    def edge_offsets(self, edge: int) -> np.ndarray:
        """Offsets of the nodes of an edge, exactly 0 and l_e at the ends."""
        return np.linspace(0.0, self.__graph.lengths[edge], self.__subdivisions[edge] + 1)

    def nearest_node(self, point: GraphPoint) -> int:
        """Mesh node closest to a graph point."""
        self.__graph.check_point(point)
        n = self.__subdivisions[point.edge]
        index = int(round(point.offset / self.__graph.lengths[point.edge] * n))
        return int(self.edge_nodes(point.edge)[min(max(index, 0), n)])

    def node_point(self, node: int) -> GraphPoint:
        """Graph point of a mesh node."""
        if node < self.__graph.n_vertices:
            return self.__graph.vertex_point(node)
        return GraphPoint(int(self.__node_edge[node]), float(self.__node_offset[node]))

    def node_distances(
        self, source: Union[int, GraphPoint], cutoff: Optional[float] = None
    ) -> np.ndarray:
        """Graph distance from a vertex or graph point to every node.

        With a cutoff, nodes beyond an endpoint farther than cutoff may get inf.
        """
        graph = self.__graph
        at_vertices = vertex_distances(graph, source, cutoff)
        result = np.empty(self.__n_nodes)
        n_vertices = graph.n_vertices
        result[:n_vertices] = at_vertices
        inner = np.arange(n_vertices, self.__n_nodes)
        edges = self.__node_edge[inner]
        offsets = self.__node_offset[inner]
        u, v = graph.edges[edges, 0], graph.edges[edges, 1]
        result[inner] = np.minimum(
            at_vertices[u] + offsets, at_vertices[v] + graph.lengths[edges] - offsets
        )
        if isinstance(source, GraphPoint):
            same = inner[edges == source.edge]
            result[same] = np.minimum(
                result[same], np.abs(self.__node_offset[same] - source.offset)
            )
        return result


def default_mesh_size(graph: MetricGraph) -> float:
    """Shortest edge divided by the configured divisor."""
    return float(graph.lengths.min()) / setting("mesh.divisor")


class GraphFunction:
    """Continuous piecewise linear function given by its values on a Mesh.

    Values at graph vertices are shared by all incident edges, so the
    function is continuous by construction. The values are read only.
    """

    def __init__(self, mesh: Mesh, values: Any) -> None:
        values = np.array(values, dtype=float)
        if values.shape != (mesh.n_nodes,):
            raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {values.shape}")
        values.setflags(write=False)
        self.__mesh = mesh
        self.__values = values

    @classmethod
    def constant(cls, mesh: Mesh, value: float) -> "GraphFunction":
        return cls(mesh, np.full(mesh.n_nodes, float(value)))

    @classmethod
    def from_callable(
        cls, mesh: Mesh, func: Callable[[np.ndarray], np.ndarray]
    ) -> "GraphFunction":
        """Interpolate a function of the plane coordinates (x, y) at the nodes."""
        graph = mesh.graph
        coordinates = np.empty((mesh.n_nodes, 2))
        coordinates[: graph.n_vertices] = graph.points
        inner = np.arange(graph.n_vertices, mesh.n_nodes)
        edges = mesh.node_edge[inner]
        weights = (mesh.node_offset[inner] / graph.lengths[edges])[:, None]
        coordinates[inner] = (1.0 - weights) * graph.points[graph.edges[edges, 0]] + (
            weights * graph.points[graph.edges[edges, 1]]
        )
        return cls(mesh, func(coordinates))

    @property
    def mesh(self) -> Mesh:
        return self.__mesh

    @property
    def graph(self) -> MetricGraph:
        return self.__mesh.graph

    @property
    def values(self) -> np.ndarray:
        return self.__values

    def __mul__(self, factor: float) -> "GraphFunction":
        return GraphFunction(self.__mesh, factor * self.__values)

    __rmul__ = __mul__

    def edge_values(self, edge: int) -> np.ndarray:
        """Values at the nodes of an edge from u to v."""
        return self.__values[self.__mesh.edge_nodes(edge)]

    def evaluate(self, point: GraphPoint) -> float:
        """Value at a graph point."""
        self.graph.check_point(point)
        return float(
            np.interp(
                point.offset, self.__mesh.edge_offsets(point.edge), self.edge_values(point.edge)
            )
        )

    @property
    def integrals(self) -> PLIntegrals:
        mesh = self.__mesh
        return segment_integrals(
            self.__values[mesh.left], self.__values[mesh.right], mesh.seg_h
        )

    def rows(self) -> Iterator[Tuple[int, float, float]]:
        """(edge id, offset, value) for every node of every edge."""
        for edge in range(self.graph.n_edges):
            for offset, value in zip(self.__mesh.edge_offsets(edge), self.edge_values(edge)):
                yield edge, float(offset), float(value)

    def to_csv(self) -> str:
        """CSV text with the columns edge_id, offset, value."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["edge_id", "offset", "value"])
        for edge, offset, value in self.rows():
            writer.writerow([edge, repr(offset), repr(value)])
        return buffer.getvalue()


def norms(f: GraphFunction) -> Norms:
    """L1, L2 and sup norm of f."""
    integrals = f.integrals
    linf = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    return Norms(integrals.l1, integrals.l2, linf)


def segment_coefficients(mesh: Mesh, alpha: Coefficient = None) -> np.ndarray:
    """Coefficient value on every segment.

    alpha may be a constant, one value per edge or a callable
    alpha(edge_ids, offsets) evaluated at the segment midpoints.

    Raises:
        EllipticityError: a value is not positive and finite
    """
    if alpha is None:
        return np.ones(len(mesh.seg_h))
    if callable(alpha):
        edges = mesh.seg_edge
        counts = np.concatenate(([0], np.cumsum(mesh.subdivisions)[:-1]))
        index = np.arange(len(edges)) - counts[edges]
        midpoints = (index + 0.5) * mesh.seg_h
        values = np.asarray(alpha(edges, midpoints), dtype=float) * np.ones(len(edges))
    elif np.ndim(alpha) == 0:
        values = np.full(len(mesh.seg_h), float(alpha))
    else:
        per_edge = np.asarray(alpha, dtype=float)
        if per_edge.shape != (mesh.graph.n_edges,):
            raise ValueError("coefficient needs one value per edge")
        values = per_edge[mesh.seg_edge]
    if not np.all(np.isfinite(values)) or values.min() <= 0.0:
        raise EllipticityError("coefficient not uniformly elliptic")
    return values


def robin_weights(graph: MetricGraph, robin_b: RobinWeights) -> np.ndarray:
    """Robin weight of every vertex.

    Raises:
        ValueError: a weight is negative or not finite
    """
    if robin_b is None:
        return np.zeros(graph.n_vertices)
    if isinstance(robin_b, Mapping):
        weights = np.zeros(graph.n_vertices)
        for vertex, weight in robin_b.items():
            weights[int(vertex)] = float(weight)
    elif np.ndim(robin_b) == 0:
        weights = np.full(graph.n_vertices, float(robin_b))
    else:
        weights = np.asarray(robin_b, dtype=float)
        if weights.shape != (graph.n_vertices,):
            raise ValueError("Robin weights need one value per vertex")
    if not np.all(np.isfinite(weights)) or weights.min() < 0.0:
        raise ValueError("Robin weights must lie in [0, M] for a finite M")
    return weights


def dirichlet_energy(
    f: GraphFunction, robin_b: RobinWeights = None, alpha: Coefficient = None
) -> float:
    """Q(f), or Q_b(f) with Robin weights, with optional coefficient alpha."""
    mesh = f.mesh
    values = f.values
    weights = segment_coefficients(mesh, alpha)
    energy = float(np.sum(weights * (values[mesh.right] - values[mesh.left]) ** 2 / mesh.seg_h))
    if robin_b is not None:
        at_vertices = values[: f.graph.n_vertices]
        energy += float(np.sum(robin_weights(f.graph, robin_b) * at_vertices**2))
    return energy


def hat_function(mesh: Mesh, edge: int, peak: float = 1.0) -> GraphFunction:
    """Hat on one edge: zero at its ends and elsewhere, peak at the midpoint.

    The mesh must have a node at the midpoint (even subdivision).
    """
    if mesh.subdivisions[edge] % 2:
        raise ValueError(f"edge {edge} has no mesh node at its midpoint")
    values = np.zeros(mesh.n_nodes)
    offsets = mesh.edge_offsets(edge)
    length = mesh.graph.lengths[edge]
    nodes = mesh.edge_nodes(edge)
    values[nodes[1:-1]] = peak * (1.0 - np.abs(2.0 * offsets[1:-1] / length - 1.0))
    return GraphFunction(mesh, values)


def random_test_function(
    graph: MetricGraph,
    seed: Union[int, np.random.Generator],
    support_center: int,
    support_radius: float,
    mesh_size: Optional[float] = None,
    mesh: Optional[Mesh] = None,
) -> GraphFunction:
    """Nonnegative sum of 1 to 5 hat bumps supported in a ball.

    Bumps sit at random nodes in the inner half of the ball with heights in
    (0, 1] and radii between two cells and half the ball. A continuous taper
    vanishing at distance support_radius - cell cuts the sum off.

    Raises:
        ValueError: the ball reaches the window boundary or is smaller than
            two cells
    """
    if mesh is None:
        mesh = Mesh(graph, mesh_size)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cell = mesh.max_segment
    if not support_radius > 2.0 * cell:
        raise ValueError(f"support radius {support_radius} below two cells ({cell})")
    to_center = mesh.node_distances(support_center)
    if np.any(to_center[: graph.n_vertices][graph.boundary] < support_radius):
        raise ValueError("support radius reaches the window boundary")
    taper = np.clip(2.0 * (1.0 - (to_center + cell) / support_radius), 0.0, 1.0)
    eligible = np.flatnonzero(to_center <= 0.5 * support_radius - cell)
    if eligible.size == 0:
        eligible = np.array([support_center])
    values = np.zeros(mesh.n_nodes)
    for _ in range(int(rng.integers(1, setting("functions.max_bumps") + 1))):
        node = int(eligible[rng.integers(eligible.size)])
        height = 1.0 - rng.random()
        width = rng.uniform(2.0 * cell, 0.5 * support_radius)
        to_bump = mesh.node_distances(mesh.node_point(node))
        values += height * np.clip(1.0 - to_bump / width, 0.0, None)
    return GraphFunction(mesh, values * taper)


class LoopFunction:
    """Piecewise linear function on the boundary of a polygon.

    positions run from 0 to the perimeter; values[-1] equals values[0].
    corner_nodes[i] is the index of the node at the start of side i, where
    side i runs from vertex i to vertex i + 1 counterclockwise.
    """

    def __init__(
        self, polygon: Polygon, positions: Any, values: Any, corner_nodes: Sequence[int]
    ) -> None:
        positions = np.array(positions, dtype=float)
        values = np.array(values, dtype=float)
        if positions.shape != values.shape or positions.ndim != 1 or len(positions) < 2:
            raise ValueError("positions and values must be 1d arrays of equal length")
        if positions[0] != 0.0 or np.any(np.diff(positions) <= 0.0):
            raise ValueError("positions must start at 0 and increase")
        if values[-1] != values[0]:
            raise ValueError("loop function is not periodic")
        if len(corner_nodes) != polygon.n_sides or corner_nodes[0] != 0:
            raise ValueError("one corner node per side, the first at position 0")
        for array in (positions, values):
            array.setflags(write=False)
        self.__polygon = polygon
        self.__positions = positions
        self.__values = values
        self.__corner_nodes = tuple(int(node) for node in corner_nodes)

    @classmethod
    def from_side_samples(
        cls, polygon: Polygon, offsets: Sequence[Sequence[float]], values: Sequence[Sequence[float]]
    ) -> "LoopFunction":
        """Loop from per-side samples, each side from offset 0 to its length.

        The last value of a side must equal the first value of the next one.
        """
        positions, loop_values, corners = [0.0], [float(values[0][0])], []
        start = 0.0
        for side, length in enumerate(polygon.side_lengths):
            side_offsets = np.asarray(offsets[side], dtype=float)
            side_values = np.asarray(values[side], dtype=float)
            if side_offsets[0] != 0.0 or not math.isclose(side_offsets[-1], length, rel_tol=1e-12):
                raise ValueError(f"side {side} samples must span [0, {length}]")
            if side_values[0] != loop_values[-1]:
                raise ValueError(f"loop function jumps at corner {side}")
            corners.append(len(positions) - 1)
            positions.extend(start + side_offsets[1:])
            loop_values.extend(side_values[1:])
            start += float(length)
        return cls(polygon, positions, loop_values, corners)

    @property
    def polygon(self) -> Polygon:
        return self.__polygon

    @property
    def positions(self) -> np.ndarray:
        return self.__positions

    @property
    def values(self) -> np.ndarray:
        return self.__values

    @property
    def corner_nodes(self) -> Tuple[int, ...]:
        return self.__corner_nodes

    @property
    def perimeter(self) -> float:
        return float(self.__positions[-1])

    @property
    def corner_values(self) -> np.ndarray:
        return self.__values[list(self.__corner_nodes)]

    @property
    def integrals(self) -> PLIntegrals:
        return interval_integrals(self.__positions, self.__values)

    def side(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """Offsets (from the corner) and values along side index."""
        first = self.__corner_nodes[index]
        last = (
            self.__corner_nodes[index + 1]
            if index + 1 < len(self.__corner_nodes)
            else len(self.__positions) - 1
        )
        offsets = self.__positions[first : last + 1] - self.__positions[first]
        return offsets, self.__values[first : last + 1]

    def evaluate(self, position: Any) -> Any:
        """Value at an arclength position, taken modulo the perimeter."""
        return np.interp(np.mod(position, self.perimeter), self.__positions, self.__values)


def _face_index(graph: MetricGraph, polygon: Union[int, Polygon]) -> int:
    if isinstance(polygon, (int, np.integer)):
        if not 0 <= polygon < len(graph.faces):
            raise StructureError(f"graph has no face {polygon}")
        return int(polygon)
    if graph.tiling is not None:
        for index, candidate in enumerate(graph.tiling.polygons):
            if candidate == polygon:
                return index
    raise StructureError("polygon boundary is not covered by graph edges")


def boundary_restriction(f: GraphFunction, polygon: Union[int, Polygon]) -> LoopFunction:
    """Restriction of f to the boundary of a polygon of the graph's tiling.

    The loop starts at the first vertex of the polygon and runs
    counterclockwise.

    Raises:
        StructureError: the polygon is not a face of the graph
    """
    graph = f.graph
    index = _face_index(graph, polygon)
    if graph.tiling is None:
        raise StructureError("graph has no tiling")
    mesh = f.mesh
    positions, values, corners = [0.0], [], []
    for side in graph.faces[index]:
        corners.append(len(positions) - 1)
        for edge, forward in side:
            offsets = mesh.edge_offsets(edge)
            edge_values = f.edge_values(edge)
            if not forward:
                offsets = offsets[-1] - offsets[::-1]
                edge_values = edge_values[::-1]
            if not values:
                values.append(float(edge_values[0]))
            start = positions[-1]
            positions.extend(start + offsets[1:])
            values.extend(edge_values[1:])
    return LoopFunction(graph.tiling.polygons[index], positions, values, corners)


def random_loop_function(
    polygon: Polygon,
    seed: Union[int, np.random.Generator],
    nodes_per_side: int = 4,
) -> LoopFunction:
    """Nonnegative random loop function with random breakpoints per side.

    About one in five sides is flat at zero so that boundary functions with
    partial support occur.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    corner_values = rng.random(polygon.n_sides)
    corner_values[rng.random(polygon.n_sides) < 0.2] = 0.0
    offsets, values = [], []
    for side, length in enumerate(polygon.side_lengths):
        inner = np.sort(rng.uniform(0.0, length, nodes_per_side))
        inner = inner[(inner > 1e-9 * length) & (inner < length * (1.0 - 1e-9))]
        offsets.append(np.concatenate(([0.0], inner, [length])))
        end = corner_values[(side + 1) % polygon.n_sides]
        values.append(np.concatenate(([corner_values[side]], rng.random(inner.size), [end])))
    return LoopFunction.from_side_samples(polygon, offsets, values)


def loop_poincare_check(loopf: LoopFunction, level: Optional[float] = None) -> CheckRecord:
    """Check int (f - f(z))^2 <= perimeter^2 / 8 * int f'^2 on the loop.

    z is a point where the loop takes the value level, by default the
    minimum. The bound holds for every attained level.

    Raises:
        ValueError: level is not attained by the loop function
    """
    values = loopf.values
    if level is None:
        level = float(values.min())
    elif not values.min() <= level <= values.max():
        raise ValueError(f"level {level} is not attained by the loop function")
    shifted = interval_integrals(loopf.positions, values - level)
    return CheckRecord(
        "loop_poincare",
        lhs=shifted.l2sq,
        rhs=loopf.perimeter**2 / 8.0 * shifted.energy,
        metadata={"level": float(level), "perimeter": loopf.perimeter},
    )
