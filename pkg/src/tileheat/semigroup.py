"""Heat semigroup of the Kirchhoff Laplacian on a metric graph.

Linear finite elements with lumped mass on a Mesh. Vertex rows collect the
contributions of all incident edges, which realizes the Kirchhoff condition
as the natural condition of the form. Two time integrators are available:
Crank-Nicolson with successive halving of the step and a Lanczos
approximation of the matrix exponential.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp  # type: ignore
from overrides import overrides  # type: ignore
from scipy.linalg import eigh_tridiagonal  # type: ignore
from scipy.sparse.linalg import factorized  # type: ignore

from tileheat.functions import (Coefficient, GraphFunction, Mesh, RobinWeights,
                                robin_weights, segment_coefficients)
from tileheat.global_helpers import setting, threads
from tileheat.logger import logger
from tileheat.skeleton import GraphPoint, MetricGraph, boundary_distance

TRUNCATIONS = ("reflecting", "absorbing")

KERNEL_NORM_METHOD = (
    "sup of the kernel diagonal: k(t,x,y) <= sqrt(k(t,x,x) k(t,y,y)) by the "
    "semigroup property and symmetry, so the diagonal supremum is the L1 to "
    "Linf operator norm"
)


class KrylovConvergenceError(RuntimeError):
    """The Krylov integrator did not reach the final time.

    Properties:
        residual: accumulated error estimate when giving up
    """

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


class DiscreteLaplacian:
    """Stiffness and lumped mass of the form Q on a mesh.

    Rows and columns of boundary vertices are zero under absorbing
    truncation and those nodes carry no unknown.

    Properties:
        mesh, stiffness, mass, truncation, free, robin, consistent_mass
        free_stiffness: stiffness restricted to the free nodes
        symmetric_operator: D^-1/2 K D^-1/2 on the free nodes
        spectral_bound: Gershgorin bound of the symmetric operator
        null_vector: normalized D^1/2 1 when constants are stationary
    """

    def __init__(
        self,
        mesh: Mesh,
        stiffness: sp.csr_matrix,
        truncation: str,
        robin: Optional[np.ndarray] = None,
        consistent_mass: bool = False,
    ) -> None:
        graph = mesh.graph
        free = np.ones(mesh.n_nodes, dtype=bool)
        if truncation == "absorbing":
            free[: graph.n_vertices][graph.boundary] = False
        keep = sp.diags(free.astype(float))
        self.__mesh = mesh
        self.__stiffness = (keep @ stiffness @ keep).tocsr()
        self.__stiffness.eliminate_zeros()
        self.__truncation = truncation
        self.__free = free
        self.__robin = robin
        self.__consistent_mass = consistent_mass

    @property
    def mesh(self) -> Mesh:
        return self.__mesh

    @property
    def graph(self) -> MetricGraph:
        return self.__mesh.graph

    @property
    def stiffness(self) -> sp.csr_matrix:
        return self.__stiffness

    @property
    def mass(self) -> np.ndarray:
        return self.__mesh.lumped_mass

    @property
    def truncation(self) -> str:
        return self.__truncation

    @property
    def free(self) -> np.ndarray:
        return self.__free

    @property
    def robin(self) -> Optional[np.ndarray]:
        return self.__robin

    @property
    def consistent_mass(self) -> bool:
        return self.__consistent_mass

    @cached_property
    def free_stiffness(self) -> sp.csr_matrix:
        index = np.flatnonzero(self.__free)
        return self.__stiffness[index][:, index].tocsr()

    @cached_property
    def free_mass_matrix(self) -> sp.csr_matrix:
        """Mass matrix on the free nodes, consistent if requested."""
        index = np.flatnonzero(self.__free)
        if not self.__consistent_mass:
            return sp.diags(self.mass[index]).tocsr()
        mesh = self.__mesh
        h = mesh.seg_h
        rows = np.concatenate((mesh.left, mesh.right, mesh.left, mesh.right))
        cols = np.concatenate((mesh.left, mesh.right, mesh.right, mesh.left))
        data = np.concatenate((h / 3.0, h / 3.0, h / 6.0, h / 6.0))
        full = sp.coo_matrix((data, (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()
        return full[index][:, index].tocsr()

    @cached_property
    def symmetric_operator(self) -> sp.csr_matrix:
        scale = sp.diags(1.0 / np.sqrt(self.mass[self.__free]))
        return (scale @ self.free_stiffness @ scale).tocsr()

    @cached_property
    def spectral_bound(self) -> float:
        return float(abs(self.symmetric_operator).sum(axis=1).max())

    @cached_property
    def null_vector(self) -> Optional[np.ndarray]:
        if self.__truncation != "reflecting" or (
            self.__robin is not None and np.any(self.__robin > 0.0)
        ):
            return None
        vector = np.sqrt(self.mass)
        return vector / np.linalg.norm(vector)

    def restrict(self, values: np.ndarray) -> np.ndarray:
        """Nodal values on the free nodes."""
        return np.asarray(values, dtype=float)[self.__free]

    def extend(self, free_values: np.ndarray) -> np.ndarray:
        """Nodal values with zeros on the absorbing nodes."""
        values = np.zeros(self.__mesh.n_nodes)
        values[self.__free] = free_values
        return values


def assemble(
    graph: Union[MetricGraph, Mesh],
    mesh_size: Optional[float] = None,
    robin_b: RobinWeights = None,
    alpha: Coefficient = None,
    truncation: Optional[str] = None,
    consistent_mass: bool = False,
) -> DiscreteLaplacian:
    """Linear element stiffness of Q (or Q_b, with coefficient alpha).

    Every segment of length h contributes alpha / h * [[1, -1], [-1, 1]].
    Robin weights are added to the vertex diagonal.

    Raises:
        EllipticityError: alpha not positive
        ValueError: Robin weights negative, unknown truncation
    """
    mesh = graph if isinstance(graph, Mesh) else Mesh(graph, mesh_size)
    truncation = truncation or setting("semigroup.truncation")
    if truncation not in TRUNCATIONS:
        raise ValueError(f"truncation must be one of {TRUNCATIONS}, got {truncation!r}")
    weights = segment_coefficients(mesh, alpha) / mesh.seg_h
    left, right = mesh.left, mesh.right
    stiffness = sp.coo_matrix(
        (
            np.concatenate((weights, weights, -weights, -weights)),
            (np.concatenate((left, right, left, right)), np.concatenate((left, right, right, left))),
        ),
        shape=(mesh.n_nodes, mesh.n_nodes),
    ).tocsr()
    robin = None
    if robin_b is not None:
        robin = robin_weights(mesh.graph, robin_b)
        diagonal = np.zeros(mesh.n_nodes)
        diagonal[: mesh.graph.n_vertices] = robin
        stiffness = (stiffness + sp.diags(diagonal)).tocsr()
    logger().debug(
        "Assembled %s Laplacian with %d nodes, %d nonzeros",
        truncation,
        mesh.n_nodes,
        stiffness.nnz,
    )
    return DiscreteLaplacian(mesh, stiffness, truncation, robin, consistent_mass)


class Propagation(NamedTuple):
    values: np.ndarray
    steps: int
    error_estimate: float


class Scheme:
    """Time integrator of e^{-tA} on a DiscreteLaplacian.

    Public methods:
        propagate(laplacian, values, t), describe()
    """

    name = "abstract"

    def propagate(self, laplacian: DiscreteLaplacian, values: np.ndarray, t: float) -> Propagation:
        """Nodal values of e^{-tA} applied to values."""
        raise NotImplementedError

    def describe(self) -> Dict[str, Any]:
        """Parameters of the scheme for provenance records."""
        return {"scheme": self.name}


class CrankNicolson(Scheme):
    """Crank-Nicolson steps (M + dt/2 K) u' = (M - dt/2 K) u.

    Without an explicit dt the first step is h_min^2 / 4. In adaptive mode
    the step is halved until two successive results differ by less than tol
    relative in the sup norm; the reported error is a third of that
    difference.
    """

    name = "crank_nicolson"

    def __init__(
        self,
        dt: Optional[float] = None,
        adaptive: bool = True,
        tol: Optional[float] = None,
        max_halvings: Optional[int] = None,
    ) -> None:
        if dt is not None and not dt > 0.0:
            raise ValueError(f"time step must be positive, got {dt}")
        self.__dt = dt
        self.__adaptive = adaptive
        self.__tol = tol if tol is not None else setting("semigroup.crank_nicolson.tol")
        self.__max_halvings = (
            max_halvings
            if max_halvings is not None
            else setting("semigroup.crank_nicolson.max_halvings")
        )

    @property
    def dt(self) -> Optional[float]:
        return self.__dt

    def steps(
        self, laplacian: DiscreteLaplacian, values: np.ndarray, dt: float, count: int
    ) -> Iterator[np.ndarray]:
        """Nodal values after each of count steps of size dt."""
        mass = laplacian.free_mass_matrix
        stiffness = laplacian.free_stiffness
        solve = factorized((mass + 0.5 * dt * stiffness).tocsc())
        explicit = (mass - 0.5 * dt * stiffness).tocsr()
        state = laplacian.restrict(values)
        for _ in range(count):
            state = solve(explicit @ state)
            yield laplacian.extend(state)

    def _march(self, laplacian: DiscreteLaplacian, values: np.ndarray, t: float, dt: float) -> Tuple[np.ndarray, int]:
        count = max(1, math.ceil(t / dt - 1e-9))
        result = laplacian.extend(laplacian.restrict(values))
        for result in self.steps(laplacian, values, t / count, count):
            pass
        return result, count

    @overrides
    def propagate(self, laplacian: DiscreteLaplacian, values: np.ndarray, t: float) -> Propagation:
        dt = self.__dt or laplacian.mesh.min_segment**2 / 4.0
        coarse, count = self._march(laplacian, values, t, dt)
        if not self.__adaptive:
            return Propagation(coarse, count, math.nan)
        total = count
        difference = math.inf
        for _ in range(self.__max_halvings):
            dt *= 0.5
            fine, count = self._march(laplacian, values, t, dt)
            total += count
            difference = float(np.max(np.abs(fine - coarse)))
            coarse = fine
            if difference <= self.__tol * max(float(np.max(np.abs(fine))), 1e-300):
                return Propagation(fine, total, difference / 3.0)
        logger().warning(
            "Crank-Nicolson halving cap reached at dt=%g, last difference %g", dt, difference
        )
        return Propagation(coarse, total, difference / 3.0)

    @overrides
    def describe(self) -> Dict[str, Any]:
        return {"scheme": self.name, "dt": self.__dt, "adaptive": self.__adaptive, "tol": self.__tol}


def _lanczos(
    operator: sp.csr_matrix, start: np.ndarray, dimension: int, breakdown: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Lanczos basis with full reorthogonalization.

    Returns the basis rows, the diagonal and off diagonal of the tridiagonal
    matrix and whether the Krylov space became invariant.
    """
    size = start.size
    dimension = min(dimension, size)
    basis = np.zeros((dimension, size))
    alpha = np.zeros(dimension)
    beta = np.zeros(dimension)
    basis[0] = start / np.linalg.norm(start)
    for j in range(dimension):
        w = operator @ basis[j]
        alpha[j] = basis[j] @ w
        w -= alpha[j] * basis[j]
        if j > 0:
            w -= beta[j - 1] * basis[j - 1]
        w -= basis[: j + 1].T @ (basis[: j + 1] @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= breakdown:
            return basis[: j + 1], alpha[: j + 1], beta[: j + 1], True
        if j + 1 < dimension:
            basis[j + 1] = w / beta[j]
    return basis, alpha, beta, dimension == size


def _small_expm(alpha: np.ndarray, beta: np.ndarray, tau: float) -> np.ndarray:
    """exp(-tau T) e_1 for the symmetric tridiagonal T."""
    if len(alpha) == 1:
        return np.array([math.exp(-tau * alpha[0])])
    eigenvalues, eigenvectors = eigh_tridiagonal(alpha, beta[: len(alpha) - 1])
    return eigenvectors @ (np.exp(-tau * eigenvalues) * eigenvectors[0])


def lanczos_expv(
    operator: sp.csr_matrix,
    vector: np.ndarray,
    t: float,
    dimension: int = 40,
    tol: float = 1e-13,
    max_steps: int = 200000,
    bound: Optional[float] = None,
) -> Propagation:
    """exp(-t S) v for symmetric positive semidefinite S by Lanczos substeps.

    The local error of a substep tau is estimated by
    |v| beta_m |(exp(-tau T) e_1)_m|; steps are halved until it is below
    tol |v_0| tau / t and grown by half after easy steps.

    Raises:
        KrylovConvergenceError: more than max_steps substeps
    """
    state = np.array(vector, dtype=float)
    norm_start = float(np.linalg.norm(state))
    if norm_start == 0.0 or t == 0.0:
        return Propagation(state, 0, 0.0)
    bound = bound if bound is not None else float(abs(operator).sum(axis=1).max())
    bound = max(bound, 1e-300)
    done, steps, error = 0.0, 0, 0.0
    tau = min(t, dimension**2 / (4.0 * bound))
    breakdown = 1e-13 * bound
    while done < t * (1.0 - 1e-15):
        tau = min(tau, t - done)
        norm_state = float(np.linalg.norm(state))
        if norm_state == 0.0:
            break
        basis, alpha, beta, invariant = _lanczos(operator, state, dimension, breakdown)
        while True:
            steps += 1
            if steps > max_steps:
                raise KrylovConvergenceError(
                    f"Krylov integration stopped at t={done:g} of {t:g}", error
                )
            coefficients = _small_expm(alpha, beta, tau)
            local = 0.0 if invariant else norm_state * beta[-1] * abs(coefficients[-1])
            allowed = tol * norm_start * tau / t
            if local <= allowed:
                break
            tau *= 0.5
        state = norm_state * (basis.T @ coefficients)
        done += tau
        error += local
        if local < 0.1 * allowed:
            tau *= 1.5
    return Propagation(state, steps, error)


class KrylovExpm(Scheme):
    """Lanczos approximation of the exponential of the symmetrized operator.

    e^{-tA} f = D^-1/2 e^{-tS} D^1/2 f with S = D^-1/2 K D^-1/2. The constant
    mode is split off when it is stationary, so mass is conserved to
    rounding.
    """

    name = "krylov_expm"

    def __init__(
        self,
        dimension: Optional[int] = None,
        tol: Optional[float] = None,
        max_steps: Optional[int] = None,
    ) -> None:
        self.__dimension = dimension or setting("semigroup.krylov.dimension")
        self.__tol = tol if tol is not None else setting("semigroup.krylov.tol")
        self.__max_steps = max_steps or setting("semigroup.krylov.max_steps")

    @property
    def dimension(self) -> int:
        return self.__dimension

    @overrides
    def propagate(self, laplacian: DiscreteLaplacian, values: np.ndarray, t: float) -> Propagation:
        if laplacian.consistent_mass:
            raise ValueError("the Krylov scheme needs the lumped mass")
        root = np.sqrt(laplacian.mass[laplacian.free])
        state = laplacian.restrict(values) * root
        stationary = np.zeros_like(state)
        null = laplacian.null_vector
        if null is not None:
            stationary = (null @ state) * null
            state = state - stationary
        result = lanczos_expv(
            laplacian.symmetric_operator,
            state,
            t,
            self.__dimension,
            self.__tol,
            self.__max_steps,
            laplacian.spectral_bound,
        )
        logger().debug("Krylov propagation to t=%g in %d substeps", t, result.steps)
        return Propagation(
            laplacian.extend((result.values + stationary) / root), result.steps, result.error_estimate
        )

    @overrides
    def describe(self) -> Dict[str, Any]:
        return {"scheme": self.name, "dimension": self.__dimension, "tol": self.__tol}


@dataclass(frozen=True)
class HeatState:
    """Result of an evolution with its provenance."""

    function: GraphFunction
    t: float
    provenance: Dict[str, Any] = field(default_factory=dict)
    error_estimate: float = 0.0


def _initial_values(laplacian: DiscreteLaplacian, f0: GraphFunction) -> np.ndarray:
    if f0.mesh is not laplacian.mesh:
        raise ValueError("initial function lives on a different mesh")
    return laplacian.extend(laplacian.restrict(f0.values))


def evolve(
    laplacian: DiscreteLaplacian,
    f0: GraphFunction,
    t: float,
    scheme: Optional[Scheme] = None,
    label: str = "",
) -> HeatState:
    """Approximation of e^{-tA} f0.

    Raises:
        ValueError: t < 0
        KrylovConvergenceError: Krylov scheme did not converge
    """
    return evolve_many(laplacian, f0, [t], scheme, label)[0]


def evolve_many(
    laplacian: DiscreteLaplacian,
    f0: GraphFunction,
    times: Sequence[float],
    scheme: Optional[Scheme] = None,
    label: str = "",
) -> List[HeatState]:
    """States at several times, propagating from each time to the next.

    The states are returned in the order of times.
    """
    if any(t < 0.0 for t in times):
        raise ValueError("times must be nonnegative")
    scheme = scheme or KrylovExpm()
    states: Dict[float, HeatState] = {}
    values = _initial_values(laplacian, f0)
    current, steps, error = 0.0, 0, 0.0
    for t in sorted(set(times)):
        if t == 0.0:
            function = f0
        else:
            result = scheme.propagate(laplacian, values, t - current)
            values, current = result.values, t
            steps += result.steps
            if not math.isnan(result.error_estimate):
                error += result.error_estimate
            function = GraphFunction(laplacian.mesh, values)
        provenance = {"initial": label, **scheme.describe(), "steps": steps, "truncation": laplacian.truncation}
        states[t] = HeatState(function, float(t), provenance, error)
    return [states[t] for t in times]


def _delta(laplacian: DiscreteLaplacian, source: GraphPoint) -> Tuple[int, GraphFunction]:
    node = laplacian.mesh.nearest_node(source)
    values = np.zeros(laplacian.mesh.n_nodes)
    values[node] = 1.0 / laplacian.mass[node]
    return node, GraphFunction(laplacian.mesh, values)


def _warn_resolution(laplacian: DiscreteLaplacian, t: float) -> None:
    floor = laplacian.mesh.mesh_size**2 / 4.0
    if t < floor:
        logger().warning("kernel under-resolved: t=%g below mesh_size^2/4=%g", t, floor)


def heat_kernel_columns(
    laplacian: DiscreteLaplacian,
    source: GraphPoint,
    times: Sequence[float],
    scheme: Optional[Scheme] = None,
) -> List[GraphFunction]:
    """k(t, source, .) at several times from one evolution of a discrete delta."""
    if any(not t > 0.0 for t in times):
        raise ValueError("kernel times must be positive")
    for t in times:
        _warn_resolution(laplacian, t)
    _, delta = _delta(laplacian, source)
    label = f"delta at edge {source.edge} offset {source.offset:g}"
    return [state.function for state in evolve_many(laplacian, delta, times, scheme, label)]


def heat_kernel_column(
    laplacian: DiscreteLaplacian,
    source: GraphPoint,
    t: float,
    scheme: Optional[Scheme] = None,
) -> GraphFunction:
    """Approximation of k(t, source, .): the evolved delta at the nearest node."""
    return heat_kernel_columns(laplacian, source, [t], scheme)[0]


def kernel_symmetry(
    laplacian: DiscreteLaplacian,
    x: GraphPoint,
    y: GraphPoint,
    t: float,
    scheme: Optional[Scheme] = None,
) -> Tuple[float, float]:
    """(k(t, x, y), k(t, y, x)) from two kernel columns."""
    from_x = heat_kernel_column(laplacian, x, t, scheme)
    from_y = heat_kernel_column(laplacian, y, t, scheme)
    node_x, node_y = laplacian.mesh.nearest_node(x), laplacian.mesh.nearest_node(y)
    return float(from_x.values[node_y]), float(from_y.values[node_x])


def kernel_diagonal(
    laplacian: DiscreteLaplacian,
    sources: Sequence[GraphPoint],
    times: Sequence[float],
    scheme: Optional[Scheme] = None,
) -> np.ndarray:
    """k(t, x, x) for every source (rows) and time (columns).

    Sources run concurrently on TILEHEAT_THREADS worker threads.
    """

    def diagonal(source: GraphPoint) -> List[float]:
        node = laplacian.mesh.nearest_node(source)
        columns = heat_kernel_columns(laplacian, source, times, scheme)
        return [float(column.values[node]) for column in columns]

    with ThreadPoolExecutor(max_workers=threads()) as executor:
        rows = list(executor.map(diagonal, sources))
    return np.array(rows).reshape(len(sources), len(times))


def front_clearance(graph: MetricGraph, t: float) -> float:
    """Distance to the window boundary a source needs at time t."""
    return setting("checks.front_clearance") * math.sqrt(t) + graph.cell_diameter


def core_sources(graph: MetricGraph, count: Optional[int] = None) -> List[GraphPoint]:
    """The vertex farthest from the boundary and the midpoints of its edges."""
    vertex = int(np.argmax(graph.boundary_vertex_distances))
    sources = [graph.vertex_point(vertex)]
    sources.extend(graph.midpoint(edge) for edge in graph.incident_edges(vertex))
    return sources[:count] if count else sources


@dataclass(frozen=True)
class SupNormEstimate:
    """Estimate of the L1 to Linf norm of e^{-tA}.

    truncation_limited is set if no source kept the front clearance, the
    estimate then uses all sources. truncation_dominated is set if the
    estimate is at the equilibrium level of the finite window.
    """

    t: float
    estimate: float
    diagonal: Tuple[float, ...]
    sources: Tuple[GraphPoint, ...]
    excluded: Tuple[GraphPoint, ...]
    truncation_limited: bool
    truncation_dominated: bool
    method: str = KERNEL_NORM_METHOD


def admissible_sources(
    graph: MetricGraph, t: float, sources: Sequence[GraphPoint]
) -> Tuple[List[GraphPoint], List[GraphPoint]]:
    """Split sources by the front clearance at time t."""
    clearance = front_clearance(graph, t)
    kept, excluded = [], []
    for source in sources:
        (kept if boundary_distance(graph, source) >= clearance else excluded).append(source)
    if excluded:
        logger().info(
            "%d sources closer than %g to the window boundary excluded at t=%g",
            len(excluded),
            clearance,
            t,
        )
    return kept, excluded


def sup_norm_estimates(
    laplacian: DiscreteLaplacian,
    times: Sequence[float],
    sources: Optional[Sequence[GraphPoint]] = None,
    scheme: Optional[Scheme] = None,
) -> List[SupNormEstimate]:
    """sup_norm_1_to_inf for several times from one evolution per source."""
    graph = laplacian.graph
    sources = list(sources) if sources is not None else core_sources(graph)
    if not sources:
        raise ValueError("no candidate sources")
    diagonal = kernel_diagonal(laplacian, sources, times, scheme)
    equilibrium = 1.0 / graph.total_length
    estimates = []
    for column, t in enumerate(times):
        kept, excluded = admissible_sources(graph, t, sources)
        limited = not kept
        used = kept or sources
        values = tuple(float(diagonal[sources.index(source), column]) for source in used)
        estimate = max(values)
        estimates.append(
            SupNormEstimate(
                float(t),
                estimate,
                values,
                tuple(used),
                tuple(excluded),
                limited,
                bool(laplacian.truncation == "reflecting" and estimate <= 1.05 * equilibrium),
            )
        )
    return estimates


def sup_norm_1_to_inf(
    laplacian: DiscreteLaplacian,
    t: float,
    sources: Optional[Sequence[GraphPoint]] = None,
    scheme: Optional[Scheme] = None,
) -> SupNormEstimate:
    """Largest kernel diagonal over the admissible candidate sources."""
    return sup_norm_estimates(laplacian, [t], sources, scheme)[0]
