"""Extension of a boundary function into the interior of a polygon.

The polygon is cut into the triangles spanned by its sides and the
incenter. In the local frame of side i (start corner at the origin, side
along +x, incenter at (d, r)) the extension is

    F(x, y) = (1 - y / r) f((x - d y / r) / (1 - y / r)) + k y / r,

so F equals f on the side and k at the incenter. With the substitution
s = y / r and u = (x - d s) / (1 - s) each triangle becomes the rectangle
[0, l] x [0, r] with area weight (1 - s), where all integrals of a
piecewise linear f have closed forms.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from tileheat.checks import CheckRecord
from tileheat.functions import (GraphFunction, LoopFunction, boundary_restriction,
                                dirichlet_energy, interval_integrals,
                                loop_poincare_check, norms)
from tileheat.geometry import Polygon
from tileheat.logger import logger


@dataclass(frozen=True)
class TriangleDecomposition:
    """Triangles spanned by the sides of a tangential polygon and its incenter.

    Per side i: start corner, unit tangent, inward unit normal, length l_i
    and foot offset d_i of the incenter along the side. The common altitude
    is the inradius r.
    """

    polygon: Polygon
    starts: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    feet: np.ndarray
    radius: float

    @property
    def n_triangles(self) -> int:
        return len(self.lengths)

    @property
    def apex(self) -> np.ndarray:
        return np.asarray(self.polygon.incenter, dtype=float)

    @property
    def maxima(self) -> np.ndarray:
        """m_i, the largest distance from the foot to an end of side i."""
        return np.maximum(np.abs(self.feet), np.abs(self.lengths - self.feet))

    @property
    def max_foot_distance(self) -> float:
        return float(self.maxima.max())

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * self.lengths * self.radius

    def to_local(self, index: int, xy: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Local (x, y) of plane points in the frame of triangle index."""
        relative = np.asarray(xy, dtype=float) - self.starts[index]
        return relative @ self.tangents[index], relative @ self.normals[index]

    def to_global(self, index: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return (
            self.starts[index]
            + x[..., None] * self.tangents[index]
            + y[..., None] * self.normals[index]
        )


def triangle_decomposition(polygon: Polygon) -> TriangleDecomposition:
    """Local frames of the triangles of a tangential polygon."""
    starts = polygon.points.copy()
    sides = np.roll(starts, -1, axis=0) - starts
    lengths = np.hypot(sides[:, 0], sides[:, 1])
    tangents = sides / lengths[:, None]
    normals = np.column_stack((-tangents[:, 1], tangents[:, 0]))
    relative = np.asarray(polygon.incenter) - starts
    feet = np.einsum("ij,ij->i", relative, tangents)
    return TriangleDecomposition(
        polygon, starts, tangents, normals, lengths, feet, float(polygon.inradius)
    )


@dataclass(frozen=True)
class ExtensionField:
    """Extension of a loop function with offset constant k."""

    decomposition: TriangleDecomposition
    boundary: LoopFunction
    k: float

    def side(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """Breakpoints and values of f along side index, spanning [0, l_i]."""
        offsets, values = self.boundary.side(index)
        length = self.decomposition.lengths[index]
        return offsets * (length / offsets[-1]), values


def choose_k(loopf: LoopFunction) -> float:
    """Smallest of the corner values and the boundary mean of f.

    Raises:
        ValueError: f is negative somewhere
    """
    if loopf.values.min() < 0.0:
        raise ValueError("boundary function must be nonnegative")
    mean = loopf.integrals.l1 / loopf.perimeter
    return float(min(loopf.corner_values.min(), mean))


def make_extension(
    polygon: Polygon, loopf: LoopFunction, k: Optional[float] = None
) -> ExtensionField:
    """Extension field of a loop function on polygon, k from choose_k by default."""
    if loopf.polygon.n_sides != polygon.n_sides:
        raise ValueError("loop function belongs to a different polygon")
    if k is None:
        k = choose_k(loopf)
    return ExtensionField(triangle_decomposition(polygon), loopf, float(k))


def _side_eval(offsets: np.ndarray, values: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values and slopes of the piecewise linear side function at u."""
    piece = np.clip(np.searchsorted(offsets, u, side="right") - 1, 0, len(offsets) - 2)
    slopes = np.diff(values) / np.diff(offsets)
    return np.interp(u, offsets, values), slopes[piece]


def _local_value(field: ExtensionField, index: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    decomposition = field.decomposition
    r, d = decomposition.radius, decomposition.feet[index]
    s = np.asarray(y, dtype=float) / r
    below = s < 1.0
    safe = np.where(below, 1.0 - s, 1.0)
    u = (np.asarray(x, dtype=float) - d * s) / safe
    offsets, values = field.side(index)
    f_u, _ = _side_eval(offsets, values, u)
    return np.where(below, (1.0 - s) * f_u + field.k * s, field.k)


def _local_gradient(
    field: ExtensionField, index: int, x: np.ndarray, y: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """dF/dx = f'(u) and dF/dy = k/r - f(u)/r + (x - d)/(r - y) f'(u)."""
    decomposition = field.decomposition
    r, d = decomposition.radius, decomposition.feet[index]
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    u = (x - d * y / r) / (1.0 - y / r)
    offsets, values = field.side(index)
    f_u, slope = _side_eval(offsets, values, u)
    return slope, field.k / r - f_u / r + (x - d) / (r - y) * slope


def _locate(field: ExtensionField, xy: np.ndarray) -> Tuple[int, float, float]:
    decomposition = field.decomposition
    r = decomposition.radius
    tol = 1e-12 * (r + float(decomposition.lengths.max()))
    for index in range(decomposition.n_triangles):
        x, y = decomposition.to_local(index, xy)
        l, d = decomposition.lengths[index], decomposition.feet[index]
        if (
            -tol <= y <= r + tol
            and d * y / r - tol <= x <= l - (l - d) * y / r + tol
        ):
            return index, float(x), float(min(max(y, 0.0), r))
    raise ValueError(f"point {tuple(xy)} is outside the polygon")


def evaluate_extension(field: ExtensionField, point: Sequence[float]) -> float:
    """Value of the extension at a point of the polygon.

    Raises:
        ValueError: point outside the polygon
    """
    index, x, y = _locate(field, np.asarray(point, dtype=float))
    return float(_local_value(field, index, np.array(x), np.array(y)))


def extension_gradient(field: ExtensionField, point: Sequence[float]) -> np.ndarray:
    """Gradient of the extension in plane coordinates.

    Raises:
        ValueError: point outside the polygon or at the incenter
    """
    index, x, y = _locate(field, np.asarray(point, dtype=float))
    if y >= field.decomposition.radius:
        raise ValueError("gradient is not defined at the incenter")
    d_x, d_y = _local_gradient(field, index, np.array(x), np.array(y))
    decomposition = field.decomposition
    return float(d_x) * decomposition.tangents[index] + float(d_y) * decomposition.normals[index]


class ExtensionIntegrals(NamedTuple):
    """Per triangle integrals of F, F^2 and |grad F|^2."""

    l1: np.ndarray
    l2sq: np.ndarray
    dirichlet: np.ndarray

    @property
    def totals(self) -> Tuple[float, float, float]:
        return float(self.l1.sum()), float(self.l2sq.sum()), float(self.dirichlet.sum())


def _y_moment(power_free: int, power_s: int, r: float) -> float:
    """Integral over 0 <= y <= r of (1 - s)^power_free s^power_s, s = y / r."""
    polynomial = np.polynomial.Polynomial([1.0, -1.0]) ** power_free * np.polynomial.Polynomial(
        [0.0, 1.0]
    ) ** power_s
    antiderivative = polynomial.integ()
    return r * float(antiderivative(1.0) - antiderivative(0.0))


def extension_integrals(field: ExtensionField) -> ExtensionIntegrals:
    """Closed form integrals of F, F^2 and |grad F|^2 over every triangle.

    In (u, s) coordinates F = (1 - s) f(u) + k s with area element
    (1 - s) r du ds, dF/dx = f'(u) and r dF/dy = k - f(u) + (u - d) f'(u).
    """
    decomposition = field.decomposition
    r, k = decomposition.radius, field.k
    # (1-s)^a s^b moments of the area weight (1 - s)
    m20, m11, m02 = _y_moment(2, 0, r), _y_moment(1, 1, r), _y_moment(0, 2, r)
    m30, m21, m12 = _y_moment(3, 0, r), _y_moment(2, 1, r), _y_moment(1, 2, r)
    l1, l2sq, dirichlet = [], [], []
    for index in range(decomposition.n_triangles):
        offsets, values = field.side(index)
        length, d = decomposition.lengths[index], decomposition.feet[index]
        side = interval_integrals(offsets, values)
        l1.append(m20 * side.integral + m11 * k * length)
        l2sq.append(m30 * side.l2sq + 2.0 * m21 * k * side.integral + m12 * k * k * length)
        steps = np.diff(offsets)
        slopes = np.diff(values) / steps
        # k - f(u) + (u - d) f'(u) is constant on a piece: k minus the piece at u = d
        bracket = k - (values[:-1] + slopes * (d - offsets[:-1]))
        dirichlet.append((r / 2.0) * side.energy + np.sum(bracket**2 * steps) / (2.0 * r))
    return ExtensionIntegrals(np.array(l1), np.array(l2sq), np.array(dirichlet))


def quadrature_integrals(field: ExtensionField, order: int = 8) -> ExtensionIntegrals:
    """Gauss-Legendre quadrature of the same integrals.

    Every triangle is fanned from the incenter over the breakpoints of f.
    F is affine on every fan triangle, so a collapsed tensor rule of this
    order integrates F and F^2 exactly; |grad F|^2 is smooth there as well.
    """
    decomposition = field.decomposition
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes, weights = 0.5 * (nodes + 1.0), 0.5 * weights
    xi, eta = np.meshgrid(nodes, nodes, indexing="ij")
    w_2d = np.outer(weights, weights)
    r = decomposition.radius
    l1, l2sq, dirichlet = [], [], []
    for index in range(decomposition.n_triangles):
        offsets, _ = field.side(index)
        apex_x, apex_y = decomposition.feet[index], r
        totals = np.zeros(3)
        for u_a, u_b in zip(offsets[:-1], offsets[1:]):
            # Duffy map of the square to the fan triangle (apex, (u_a, 0), (u_b, 0))
            x = apex_x + xi * (u_a - apex_x) + xi * eta * (u_b - u_a)
            y = apex_y - xi * apex_y
            jacobian = xi * (u_b - u_a) * apex_y
            value = _local_value(field, index, x, y)
            d_x, d_y = _local_gradient(field, index, x, y)
            totals += [
                np.sum(w_2d * jacobian * value),
                np.sum(w_2d * jacobian * value**2),
                np.sum(w_2d * jacobian * (d_x**2 + d_y**2)),
            ]
        l1.append(totals[0])
        l2sq.append(totals[1])
        dirichlet.append(totals[2])
    return ExtensionIntegrals(np.array(l1), np.array(l2sq), np.array(dirichlet))


class DirichletTerms(NamedTuple):
    """Per triangle decomposition of the Dirichlet integral.

    exact = gradient + (1 / (2 r)) int (u - d)^2 f'^2 + bulk + vertex, and
    bound replaces the middle term by m_i^2 / (2 r) times the side energy.
    """

    exact: np.ndarray
    gradient: np.ndarray
    spread: np.ndarray
    bulk: np.ndarray
    vertex: np.ndarray
    bound: np.ndarray

    @property
    def identity_residual(self) -> float:
        return float(
            np.max(np.abs(self.exact - (self.gradient + self.spread + self.bulk + self.vertex)))
        )


def dirichlet_bound_terms(field: ExtensionField) -> DirichletTerms:
    """Split the Dirichlet integral of every triangle into its parts.

    With f_0, f_l the values at the ends of side i:
        bulk = l k^2 / (2 r) - (2 k / r) int f + (1 / r) int f^2
        vertex = (k / r) ((l - d) f_l + d f_0) - ((l - d) f_l^2 + d f_0^2) / (2 r)
    """
    decomposition = field.decomposition
    r, k = decomposition.radius, field.k
    exact = extension_integrals(field).dirichlet
    gradient, spread, bulk, vertex, bound = [], [], [], [], []
    for index in range(decomposition.n_triangles):
        offsets, values = field.side(index)
        length, d = decomposition.lengths[index], decomposition.feet[index]
        m = decomposition.maxima[index]
        side = interval_integrals(offsets, values)
        slopes = np.diff(values) / np.diff(offsets)
        moment = np.sum(slopes**2 * ((offsets[1:] - d) ** 3 - (offsets[:-1] - d) ** 3) / 3.0)
        f_0, f_l = values[0], values[-1]
        gradient.append(0.5 * r * side.energy)
        spread.append(moment / (2.0 * r))
        bulk.append(length * k * k / (2.0 * r) - 2.0 * k / r * side.integral + side.l2sq / r)
        vertex.append(
            k / r * ((length - d) * f_l + d * f_0)
            - ((length - d) * f_l**2 + d * f_0**2) / (2.0 * r)
        )
        bound.append(gradient[-1] + m * m / (2.0 * r) * side.energy + bulk[-1] + vertex[-1])
    return DirichletTerms(
        exact, np.array(gradient), np.array(spread), np.array(bulk), np.array(vertex), np.array(bound)
    )


@dataclass(frozen=True)
class ExtensionReport:
    """Checks of the extension inequalities on one polygon."""

    k: float
    integrals: ExtensionIntegrals
    ineq1: CheckRecord
    ineq2: CheckRecord
    ineq3: CheckRecord
    dirichlet: CheckRecord
    poincare: CheckRecord

    @property
    def records(self) -> List[CheckRecord]:
        return [self.ineq1, self.ineq2, self.ineq3, self.dirichlet, self.poincare]

    @property
    def passed(self) -> bool:
        return all(record.passed for record in self.records)


def verify_extension_bounds(
    polygon: Polygon, loopf: LoopFunction, k: Optional[float] = None
) -> ExtensionReport:
    """Check the three extension inequalities for a boundary function.

        ||f||^2_{L2(dP)} <= (4 / r) ||F||^2_{L2(P)}
        ||F||_{L1(P)} <= (r / 2) ||f||_{L1(dP)}
        int_P |grad F|^2 <= (r / 2 + |dP|^2 / (4 r)) int_{dP} f'^2

    together with the summed per triangle Dirichlet bound and the loop
    Poincare inequality at level k.
    """
    field = make_extension(polygon, loopf, k)
    integrals = extension_integrals(field)
    i1, i2, i_d = integrals.totals
    r = field.decomposition.radius
    boundary = loopf.integrals
    perimeter = polygon.perimeter
    terms = dirichlet_bound_terms(field)
    level = min(max(field.k, float(loopf.values.min())), float(loopf.values.max()))
    report = ExtensionReport(
        k=field.k,
        integrals=integrals,
        ineq1=CheckRecord("extension_l2", boundary.l2sq, 4.0 / r * i2),
        ineq2=CheckRecord("extension_l1", i1, r / 2.0 * boundary.l1),
        ineq3=CheckRecord(
            "extension_dirichlet",
            i_d,
            (r / 2.0 + perimeter**2 / (4.0 * r)) * boundary.energy,
        ),
        dirichlet=CheckRecord(
            "extension_dirichlet_triangles",
            float(terms.exact.sum()),
            float(terms.bound.sum()),
            metadata={"identity_residual": terms.identity_residual},
        ),
        poincare=loop_poincare_check(loopf, level),
    )
    logger().debug("Extension checks with k=%g: %s", field.k, [rec.status for rec in report.records])
    return report


def nash2_via_extension(f: GraphFunction, h: Optional[float] = None) -> List[CheckRecord]:
    """Check the steps of the two dimensional Nash chain on a graph function.

    Every polygon is extended with its own k. With the sums I1, I2 and ID of
    the extension integrals over all polygons:
        ||f||_2^4 <= (4 / h^2) I2^2
        I1 <= H ||f||_1
        ID <= (H / 2 + M^2 / (4 h)) 2 Q(f)
    The support of f must avoid the window boundary, so that every edge
    carrying f lies on two polygons.
    """
    graph = f.graph
    if graph.tiling is None:
        raise ValueError("graph has no tiling")
    constants = graph.constants
    h = constants.h if h is None else h
    sums = np.zeros(3)
    extended = 0
    for index, face in enumerate(graph.faces):
        carrying = any(
            np.any(f.edge_values(edge) != 0.0) for side in face for edge, _ in side
        )
        if not carrying:
            continue
        loopf = boundary_restriction(f, index)
        field = make_extension(graph.tiling.polygons[index], loopf)
        sums += extension_integrals(field).totals
        extended += 1
    base = norms(f)
    energy = dirichlet_energy(f)
    logger().debug("Extension chain over %d polygons", extended)
    return [
        CheckRecord("nash2_extension_l2", base.l2**4, 4.0 / h**2 * sums[1] ** 2),
        CheckRecord("nash2_extension_l1", sums[0], constants.H * base.l1),
        CheckRecord(
            "nash2_extension_dirichlet",
            sums[2],
            (constants.H / 2.0 + constants.M**2 / (4.0 * h)) * 2.0 * energy,
        ),
    ]
