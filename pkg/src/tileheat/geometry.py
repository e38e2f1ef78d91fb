"""Polygonal tilings of the plane and their constants.

A tiling is represented by the finite set of its convex tangential polygons
meeting a rectangular window. Three regular tilings can be generated, any
other tiling is read from a tiling document.

Public classes:
    Window, Polygon, TilingConstants, Tiling
    RegularTiling with the subclasses SquareTiling, TriangularTiling and
    HexagonalTiling

Public functions:
    incircle, make_regular_tiling, load_tiling, tiling_constants, dilate,
    rigid_motion, clip_polygon, polygon_area, tiling_to_dict, save_tiling
"""

import json
import math
import os
import zlib
from dataclasses import dataclass, replace
from functools import cached_property
from typing import (Any, Iterator, List, Mapping, Optional, Sequence, Tuple,
                    Union)

import numpy as np
import yaml  # type: ignore
from hashids import Hashids  # type: ignore
from overrides import overrides  # type: ignore
import scipy.sparse as sp  # type: ignore
from scipy.sparse.csgraph import connected_components  # type: ignore
from scipy.spatial import cKDTree  # type: ignore

from tileheat.global_helpers import setting, write_atomic
from tileheat.logger import logger
from tileheat.typedef import SCHEMA_VERSION, ConstantsDict, TilingDict

KIND_IDS = {"custom": 0, "square": 1, "triangular": 2, "hexagonal": 3}


class TilingError(ValueError):
    """Base class of all validation errors of tilings.

    Properties:
        polygon_index: index of the offending polygon or None
    """

    def __init__(self, message: str, polygon_index: Optional[int] = None) -> None:
        if polygon_index is not None:
            message = f"polygon {polygon_index}: {message}"
        super().__init__(message)
        self.polygon_index = polygon_index


class EmptyWindowError(TilingError):
    """The window does not contain a single polygon."""


class NonConvexPolygonError(TilingError):
    """A vertex loop is not strictly convex."""


class NoIncircleError(TilingError):
    """A convex polygon has no circle tangent to all of its sides.

    Properties:
        distances: distance of the least squares center to every side line
    """

    def __init__(
        self, distances: Sequence[float], polygon_index: Optional[int] = None
    ) -> None:
        report = ", ".join(f"{distance:.12g}" for distance in distances)
        super().__init__(f"no incircle (side distances: {report})", polygon_index)
        self.distances = tuple(float(distance) for distance in distances)


class OverlapError(TilingError):
    """The interiors of two polygons intersect.

    Properties:
        other_index: index of the second polygon
        area: area of the intersection
    """

    def __init__(self, first: int, second: int, area: float) -> None:
        super().__init__(f"interior overlaps polygon {second} (area {area:.6g})", first)
        self.other_index = second
        self.area = area


def polygon_area(points: np.ndarray) -> float:
    """Signed area of a vertex loop (shoelace formula)."""
    points = np.asarray(points, dtype=float)
    if len(points) < 3:
        return 0.0
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def clip_polygon(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Intersection of a polygon with a convex counterclockwise polygon.

    Sutherland-Hodgman clipping. Returns an empty (0, 2) array if the two
    polygons do not overlap.
    """
    output = [np.asarray(point, dtype=float) for point in subject]
    clipper = np.asarray(clipper, dtype=float)
    for start, end in zip(clipper, np.roll(clipper, -1, axis=0)):
        if not output:
            break
        edge = end - start
        candidates, output = output, []

        def side(point: np.ndarray) -> float:
            # pylint: disable=cell-var-from-loop
            return edge[0] * (point[1] - start[1]) - edge[1] * (point[0] - start[0])

        for index, current in enumerate(candidates):
            previous = candidates[index - 1]
            inside_current = side(current) >= 0.0
            inside_previous = side(previous) >= 0.0
            if inside_current != inside_previous:
                s_prev, s_cur = side(previous), side(current)
                weight = s_prev / (s_prev - s_cur)
                output.append(previous + weight * (current - previous))
            if inside_current:
                output.append(current)
    if len(output) < 3:
        return np.zeros((0, 2))
    return np.array(output)


def _normalize_loop(loop: Any, polygon_index: Optional[int] = None) -> np.ndarray:
    """Return the loop as counterclockwise (n, 2) array, checking convexity."""
    points = np.asarray(loop, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise NonConvexPolygonError("vertex loop must be a list of [x, y]", polygon_index)
    if len(points) > 3 and np.allclose(points[0], points[-1], rtol=0.0, atol=0.0):
        points = points[:-1]
    if len(points) < 3:
        raise NonConvexPolygonError("fewer than three vertices", polygon_index)
    if polygon_area(points) < 0.0:
        points = points[::-1].copy()
    sides = np.roll(points, -1, axis=0) - points
    lengths = np.hypot(sides[:, 0], sides[:, 1])
    if np.any(lengths <= 0.0):
        raise NonConvexPolygonError("repeated vertex", polygon_index)
    following = np.roll(sides, -1, axis=0)
    cross = sides[:, 0] * following[:, 1] - sides[:, 1] * following[:, 0]
    # strict convexity also excludes three collinear consecutive vertices
    bad = np.flatnonzero(cross <= 1e-12 * lengths * np.roll(lengths, -1))
    if bad.size:
        raise NonConvexPolygonError(
            f"not strictly convex at vertex {(int(bad[0]) + 1) % len(points)}",
            polygon_index,
        )
    return points


def incircle(
    loop: Any, polygon_index: Optional[int] = None
) -> Tuple[Tuple[float, float], float]:
    """Center and radius of the circle tangent to every side of a convex loop.

    The center is the least squares solution of n_i . c - r = n_i . p_i for
    the inward unit normals n_i. The residuals are then checked against the
    relative tolerance ``geometry.incircle_rtol``.

    Raises:
        NonConvexPolygonError: loop is not strictly convex
        NoIncircleError: polygon is not tangential
    """
    points = _normalize_loop(loop, polygon_index)
    sides = np.roll(points, -1, axis=0) - points
    units = sides / np.hypot(sides[:, 0], sides[:, 1])[:, None]
    normals = np.column_stack((-units[:, 1], units[:, 0]))
    system = np.column_stack((normals, -np.ones(len(points))))
    rhs = np.einsum("ij,ij->i", normals, points)
    solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    center, radius = solution[:2], float(solution[2])
    distances = np.einsum("ij,ij->i", normals, center - points)
    rtol = setting("geometry.incircle_rtol")
    if not radius > 0.0 or np.any(np.abs(distances - radius) > rtol * radius):
        raise NoIncircleError(distances, polygon_index)
    return (float(center[0]), float(center[1])), radius


@dataclass(frozen=True)
class Window:
    """Axis parallel rectangle bounding the finite part of a tiling."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise EmptyWindowError("empty window")

    @classmethod
    def parse(cls, text: Union[str, float, Sequence[float]]) -> "Window":
        """Window from ``"x0,y0,x1,y1"``, a single size ``"40"`` or a list."""
        if isinstance(text, (int, float)):
            values = [float(text)]
        elif isinstance(text, str):
            values = [float(part) for part in text.replace(" ", "").split(",") if part]
        else:
            values = [float(part) for part in text]
        if len(values) == 1:
            return cls(0.0, 0.0, values[0], values[0])
        if len(values) == 4:
            return cls(*values)
        raise ValueError(f"cannot read window from {text!r}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @property
    def corners(self) -> np.ndarray:
        """Counterclockwise corners."""
        return np.array(
            [
                [self.x_min, self.y_min],
                [self.x_max, self.y_min],
                [self.x_max, self.y_max],
                [self.x_min, self.y_max],
            ]
        )

    def scaled(self, factor: float) -> "Window":
        """Window dilated about the origin."""
        return Window(*(factor * value for value in self.as_list()))

    def grown(self, factor: float) -> "Window":
        """Window with sides multiplied by factor, same center."""
        x_c, y_c = self.center
        half_w, half_h = 0.5 * factor * self.width, 0.5 * factor * self.height
        return Window(x_c - half_w, y_c - half_h, x_c + half_w, y_c + half_h)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True)
class Polygon:
    """Convex tangential polygon with counterclockwise vertices."""

    vertices: Tuple[Tuple[float, float], ...]
    incenter: Tuple[float, float]
    inradius: float

    @classmethod
    def from_vertices(cls, loop: Any, polygon_index: Optional[int] = None) -> "Polygon":
        """Validated polygon from a vertex loop of either orientation."""
        points = _normalize_loop(loop, polygon_index)
        center, radius = incircle(points, polygon_index)
        return cls(tuple((float(x), float(y)) for x, y in points), center, radius)

    @cached_property
    def points(self) -> np.ndarray:
        """Vertices as (n, 2) array."""
        points = np.array(self.vertices, dtype=float)
        points.setflags(write=False)
        return points

    @property
    def n_sides(self) -> int:
        return len(self.vertices)

    @cached_property
    def side_lengths(self) -> np.ndarray:
        sides = np.roll(self.points, -1, axis=0) - self.points
        return np.hypot(sides[:, 0], sides[:, 1])

    @property
    def perimeter(self) -> float:
        return float(self.side_lengths.sum())

    @property
    def area(self) -> float:
        return polygon_area(self.points)

    @property
    def circumradius(self) -> float:
        """Largest distance from the incenter to a vertex."""
        return float(np.max(np.hypot(*(self.points - self.incenter).T)))

    @property
    def diameter(self) -> float:
        diffs = self.points[:, None, :] - self.points[None, :, :]
        return float(np.max(np.hypot(diffs[..., 0], diffs[..., 1])))

    def transformed(self, matrix: np.ndarray, shift: Sequence[float] = (0.0, 0.0)) -> "Polygon":
        """Image under the affine map x -> matrix @ x + shift, revalidated."""
        return Polygon.from_vertices(self.points @ np.asarray(matrix).T + np.asarray(shift))


@dataclass(frozen=True)
class TilingConstants:
    # pylint: disable=invalid-name
    """Constants of a tiling.

    h and H bound the inradii from below and above, M bounds the perimeters,
    l_min is the shortest edge of the skeleton and d_max the largest vertex
    degree, known only after the skeleton has been built.
    """

    h: float
    H: float
    M: float
    l_min: float
    d_max: Optional[int] = None

    def __post_init__(self) -> None:
        if not (0.0 < self.h <= self.H < self.M and self.l_min > 0.0):
            raise TilingError(
                f"inconsistent tiling constants h={self.h} H={self.H} "
                f"M={self.M} l_min={self.l_min}"
            )

    def scaled(self, factor: float) -> "TilingConstants":
        return replace(
            self,
            h=factor * self.h,
            H=factor * self.H,
            M=factor * self.M,
            l_min=factor * self.l_min,
        )

    def as_dict(self) -> ConstantsDict:
        return {
            "h": self.h,
            "H": self.H,
            "M": self.M,
            "l_min": self.l_min,
            "d_max": self.d_max,
        }


@dataclass(frozen=True)
class Tiling:
    """Validated finite part of a tiling of the plane."""

    polygons: Tuple[Polygon, ...]
    window: Window
    constants: TilingConstants
    name: str = ""
    kind: str = "custom"
    side: Optional[float] = None

    @cached_property
    def tiling_id(self) -> str:
        """Short id derived from kind, polygon count and vertex data."""
        canonical = json.dumps(
            [[[round(x, 9), round(y, 9)] for x, y in p.vertices] for p in self.polygons]
        )
        checksum = zlib.crc32(canonical.encode("utf-8"))
        return Hashids(salt="tileheat", min_length=6).encode(
            KIND_IDS.get(self.kind, 0), len(self.polygons), checksum
        )

    @property
    def cell_diameter(self) -> float:
        """Largest polygon diameter."""
        return max(polygon.diameter for polygon in self.polygons)


def point_tolerance(polygons: Sequence[Polygon]) -> float:
    """Absolute tolerance of point coincidence tests for these polygons."""
    scale = min(float(polygon.side_lengths.min()) for polygon in polygons)
    return setting("geometry.point_tol_factor") * scale


def corner_points(
    polygons: Sequence[Polygon], tol: float
) -> Tuple[np.ndarray, List[Tuple[int, ...]]]:
    """Merge the corners of all polygons within tol.

    Returns:
        the unique points in order of first appearance and, per polygon, the
        ids of its corners
    """
    raw = np.concatenate([polygon.points for polygon in polygons])
    pairs = cKDTree(raw).query_pairs(tol, output_type="ndarray")
    adjacency = sp.coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(raw), len(raw))
    )
    _, labels = connected_components(adjacency, directed=False)
    # number the clusters by their first corner
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    mapping = rank[labels]
    unique = raw[first[order]]
    offsets = np.cumsum([0] + [polygon.n_sides for polygon in polygons])
    corner_ids = [
        tuple(int(i) for i in mapping[offsets[k] : offsets[k + 1]])
        for k in range(len(polygons))
    ]
    return np.array(unique), corner_ids


def side_chains(
    points: np.ndarray, corner_ids: Sequence[Tuple[int, ...]], tol: float
) -> List[Tuple[Tuple[int, ...], ...]]:
    """Split every polygon side at the corners of other polygons lying on it.

    Returns per polygon and per side the chain of point ids from the start
    corner to the end corner.
    """
    tree = cKDTree(points)
    chains = []
    for ids in corner_ids:
        polygon_chains = []
        for k, start in enumerate(ids):
            end = ids[(k + 1) % len(ids)]
            origin, target = points[start], points[end]
            length = float(np.hypot(*(target - origin)))
            unit = (target - origin) / length
            inner = []
            for candidate in tree.query_ball_point(0.5 * (origin + target), 0.5 * length + tol):
                if candidate in (start, end):
                    continue
                relative = points[candidate] - origin
                along = float(relative @ unit)
                across = abs(float(relative[0] * unit[1] - relative[1] * unit[0]))
                if across <= tol and tol < along < length - tol:
                    inner.append((along, candidate))
            polygon_chains.append((start, *[c for _, c in sorted(inner)], end))
        chains.append(tuple(polygon_chains))
    return chains


def _chain_lengths(points: np.ndarray, chains: Sequence[Tuple[Tuple[int, ...], ...]]) -> np.ndarray:
    lengths = []
    for polygon_chains in chains:
        for chain in polygon_chains:
            segment = points[list(chain[1:])] - points[list(chain[:-1])]
            lengths.extend(np.hypot(segment[:, 0], segment[:, 1]))
    return np.array(lengths)


def _constants_of(polygons: Sequence[Polygon], d_max: Optional[int] = None) -> TilingConstants:
    tol = point_tolerance(polygons)
    points, corner_ids = corner_points(polygons, tol)
    l_min = float(_chain_lengths(points, side_chains(points, corner_ids, tol)).min())
    if l_min < tol / setting("geometry.point_tol_factor"):
        # sides were split, refine the tolerance on the new scale
        tol = setting("geometry.point_tol_factor") * l_min
        points, corner_ids = corner_points(polygons, tol)
        l_min = float(_chain_lengths(points, side_chains(points, corner_ids, tol)).min())
    radii = [polygon.inradius for polygon in polygons]
    return TilingConstants(
        h=min(radii),
        H=max(radii),
        M=max(polygon.perimeter for polygon in polygons),
        l_min=l_min,
        d_max=d_max,
    )


def tiling_constants(tiling: Tiling) -> TilingConstants:
    """Recompute the constants (h, H, M, l_min) of a tiling.

    d_max is carried over from the stored constants.
    """
    return _constants_of(tiling.polygons, tiling.constants.d_max)


def _check_overlaps(polygons: Sequence[Polygon]) -> None:
    centers = np.array([polygon.incenter for polygon in polygons])
    reach = 2.0 * max(polygon.circumradius for polygon in polygons)
    rtol = setting("geometry.area_rtol")
    for first, second in sorted(cKDTree(centers).query_pairs(reach)):
        a, b = polygons[first], polygons[second]
        if np.hypot(*np.subtract(a.incenter, b.incenter)) >= a.circumradius + b.circumradius:
            continue
        area = polygon_area(clip_polygon(a.points, b.points))
        if area > rtol * min(a.area, b.area):
            raise OverlapError(first, second, area)


def _window_overlap(polygon: Polygon, window: Window) -> float:
    return polygon_area(clip_polygon(polygon.points, window.corners))


def build_tiling(
    polygons: Sequence[Polygon],
    window: Window,
    name: str = "",
    kind: str = "custom",
    side: Optional[float] = None,
    check_coverage: bool = False,
) -> Tiling:
    """Validate polygons against each other and the window.

    Raises:
        EmptyWindowError: no polygon lies entirely inside the window
        OverlapError: two interiors intersect
        TilingError: check_coverage and the window is not covered
    """
    polygons = tuple(polygons)
    if not polygons:
        raise EmptyWindowError("empty window")
    rtol = setting("geometry.area_rtol")
    clipped = np.array([_window_overlap(polygon, window) for polygon in polygons])
    areas = np.array([polygon.area for polygon in polygons])
    if not np.any(clipped >= areas * (1.0 - rtol)):
        raise EmptyWindowError("empty window")
    _check_overlaps(polygons)
    if check_coverage and abs(clipped.sum() - window.area) > rtol * window.area:
        raise TilingError(
            f"polygons cover {clipped.sum():.12g} of window area {window.area:.12g}"
        )
    constants = _constants_of(polygons)
    logger().debug(
        "Tiling %s with %d polygons, constants %s", kind, len(polygons), constants
    )
    return Tiling(polygons, window, constants, name=name, kind=kind, side=side)


class RegularTiling:
    """Generator of one of the three regular tilings of the plane.

    Properties:
        side: side length of the polygons

    Public methods:
        candidate_loops(window), polygons(window), tiling(window)
    """

    kind = "custom"
    n_sides = 0

    def __init__(self, side: float) -> None:
        if not side > 0.0:
            raise TilingError(f"side length must be positive, got {side}")
        self.__side = float(side)

    @property
    def side(self) -> float:
        """Return side length of the polygons."""
        return self.__side

    @property
    def inradius(self) -> float:
        """Return inradius of the polygons."""
        return self.side / (2.0 * math.tan(math.pi / self.n_sides))

    @classmethod
    def by_kind(cls, kind: str) -> type:
        """Generator class for a kind name."""
        generators = {subclass.kind: subclass for subclass in cls.__subclasses__()}
        try:
            return generators[kind]
        except KeyError as exception:
            raise TilingError(
                f"unknown tiling kind {kind!r}, expected one of {sorted(generators)}"
            ) from exception

    def candidate_loops(self, window: Window) -> Iterator[np.ndarray]:
        """Vertex loops of all polygons that might meet the window."""
        raise NotImplementedError

    def polygons(self, window: Window) -> List[Polygon]:
        """All polygons meeting the window in a set of positive area."""
        result = []
        for loop in self.candidate_loops(window):
            polygon = Polygon.from_vertices(loop)
            if _window_overlap(polygon, window) > 1e-12 * polygon.area:
                result.append(polygon)
        return result

    def tiling(self, window: Window) -> Tiling:
        """Validated tiling of the window."""
        return build_tiling(
            self.polygons(window),
            window,
            name=f"{self.kind} {self.side:g}",
            kind=self.kind,
            side=self.side,
            check_coverage=True,
        )


class SquareTiling(RegularTiling):
    """Tiling by squares with corners on the lattice side * Z^2."""

    kind = "square"
    n_sides = 4

    @overrides
    def candidate_loops(self, window: Window) -> Iterator[np.ndarray]:
        side = self.side
        unit = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        for j in range(math.floor(window.y_min / side), math.ceil(window.y_max / side)):
            for i in range(math.floor(window.x_min / side), math.ceil(window.x_max / side)):
                yield side * (unit + [i, j])


class TriangularTiling(RegularTiling):
    """Tiling by equilateral triangles, one side of each row on the x axis."""

    kind = "triangular"
    n_sides = 3

    def _lattice(self, i: int, j: int) -> Tuple[float, float]:
        return (self.side * (i + 0.5 * j), self.side * 0.5 * math.sqrt(3.0) * j)

    @overrides
    def candidate_loops(self, window: Window) -> Iterator[np.ndarray]:
        row = self.side * 0.5 * math.sqrt(3.0)
        point = self._lattice
        for j in range(math.floor(window.y_min / row) - 1, math.ceil(window.y_max / row) + 1):
            first = math.floor(window.x_min / self.side - 0.5 * j) - 2
            last = math.ceil(window.x_max / self.side - 0.5 * j) + 1
            for i in range(first, last + 1):
                yield np.array([point(i, j), point(i + 1, j), point(i, j + 1)])
                yield np.array([point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)])


class HexagonalTiling(RegularTiling):
    """Tiling by regular hexagons with one vertex pointing up."""

    kind = "hexagonal"
    n_sides = 6

    @overrides
    def candidate_loops(self, window: Window) -> Iterator[np.ndarray]:
        side = self.side
        step_x, step_y = math.sqrt(3.0) * side, 1.5 * side
        angles = math.pi / 6.0 + np.arange(6) * math.pi / 3.0
        offsets = side * np.column_stack((np.cos(angles), np.sin(angles)))
        for j in range(
            math.floor((window.y_min - side) / step_y) - 1,
            math.ceil((window.y_max + side) / step_y) + 2,
        ):
            first = math.floor((window.x_min - side) / step_x - 0.5 * j) - 1
            last = math.ceil((window.x_max + side) / step_x - 0.5 * j) + 1
            for i in range(first, last + 1):
                yield np.array([step_x * (i + 0.5 * j), step_y * j]) + offsets


def make_regular_tiling(
    kind: str, side: float, window: Union[Window, str, Sequence[float]]
) -> Tiling:
    """All polygons of a regular tiling meeting the window.

    Args:
        kind: square, triangular or hexagonal
        side: side length of the polygons
        window: Window or anything Window.parse understands
    """
    if not isinstance(window, Window):
        window = Window.parse(window)
    generator = RegularTiling.by_kind(kind)(side)
    return generator.tiling(window)


def _read_document(source: Union[str, os.PathLike, Mapping[str, Any]]) -> Mapping[str, Any]:
    if isinstance(source, Mapping):
        return source
    with open(source, "r", encoding="utf-8") as __f:
        document = yaml.safe_load(__f)
    if not isinstance(document, Mapping):
        raise TilingError(f"{source} does not hold a tiling document")
    return document


def load_tiling(source: Union[str, os.PathLike, Mapping[str, Any]]) -> Tiling:
    """Validated tiling from a tiling document (path or parsed mapping).

    JSON and YAML documents are accepted. Without a ``window`` entry the
    bounding box of all vertices is used.

    Raises:
        NonConvexPolygonError, NoIncircleError, OverlapError: naming the index
            of the offending polygon
    """
    document = _read_document(source)
    kind = str(document.get("kind", "custom"))
    loops = document.get("polygons")
    if not loops:
        raise TilingError("tiling document lists no polygons")
    polygons = [Polygon.from_vertices(loop, index) for index, loop in enumerate(loops)]
    if document.get("window") is not None:
        window = Window.parse(document["window"])
    else:
        everything = np.concatenate([polygon.points for polygon in polygons])
        window = Window(*everything.min(axis=0), *everything.max(axis=0))
    return build_tiling(
        polygons,
        window,
        name=str(document.get("name", "")),
        kind=kind,
        side=document.get("side"),
        check_coverage=kind in KIND_IDS and kind != "custom",
    )


def _transformed(tiling: Tiling, matrix: np.ndarray, shift: np.ndarray, window: Window) -> Tiling:
    polygons = [polygon.transformed(matrix, shift) for polygon in tiling.polygons]
    return build_tiling(polygons, window, name=tiling.name, kind="custom")


def dilate(tiling: Tiling, factor: float) -> Tiling:
    """Image of the tiling under x -> factor * x."""
    if not factor > 0.0:
        raise ValueError(f"dilation factor must be positive, got {factor}")
    polygons = [polygon.transformed(factor * np.eye(2)) for polygon in tiling.polygons]
    side = None if tiling.side is None else factor * tiling.side
    result = build_tiling(
        polygons, tiling.window.scaled(factor), name=tiling.name, kind=tiling.kind, side=side
    )
    return replace(result, constants=replace(result.constants, d_max=tiling.constants.d_max))


def rigid_motion(tiling: Tiling, angle: float, shift: Sequence[float] = (0.0, 0.0)) -> Tiling:
    """Image of the tiling under a rotation by angle followed by a shift.

    The new window is the bounding box of the moved window.
    """
    rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    corners = tiling.window.corners @ rotation.T + np.asarray(shift)
    window = Window(*corners.min(axis=0), *corners.max(axis=0))
    return _transformed(tiling, rotation, np.asarray(shift, dtype=float), window)


def tiling_to_dict(tiling: Tiling) -> TilingDict:
    """Tiling document of a tiling."""
    return {
        "schema_version": SCHEMA_VERSION,
        "name": tiling.name,
        "kind": tiling.kind,
        "side": tiling.side,
        "window": tiling.window.as_list(),
        "tiling_id": tiling.tiling_id,
        "polygons": [[list(vertex) for vertex in polygon.vertices] for polygon in tiling.polygons],
    }


def save_tiling(tiling: Tiling, path: str) -> None:
    """Write the tiling document as JSON."""
    write_atomic(path, json.dumps(tiling_to_dict(tiling), sort_keys=True, indent=1) + "\n")
