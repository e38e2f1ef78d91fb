"""End to end evaluation of the Nash, ultracontractive and Gaussian bounds.

Every check produces CheckRecord objects, a BoundsReport collects them
together with the constants of the tiling.
"""

import csv
import datetime
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from tileheat.checks import CheckRecord, failing
from tileheat.config import RunConfig
from tileheat.euler_lift import nash1_via_lift
from tileheat.extension import nash2_via_extension
from tileheat.functions import (Coefficient, GraphFunction, Mesh, RobinWeights,
                                dirichlet_energy, random_test_function)
from tileheat.geometry import (Tiling, TilingConstants, dilate, load_tiling,
                               make_regular_tiling, tiling_constants)
from tileheat.global_helpers import setting
from tileheat.logger import logger
from tileheat.mapping import scheme_mapping
from tileheat.semigroup import (KERNEL_NORM_METHOD, DiscreteLaplacian, Scheme,
                                SupNormEstimate, admissible_sources, assemble,
                                core_sources, heat_kernel_columns,
                                kernel_diagonal, sup_norm_estimates)
from tileheat.skeleton import (GraphPoint, MetricGraph, build_skeleton,
                               vertex_distances)
from tileheat.typedef import (SCHEMA_VERSION, ReportDict, TransitionRowDict)

REGIME_LOCAL = "t^-1/2"
REGIME_GLOBAL = "t^-1"


class ClearanceError(ValueError):
    """Window too small for the requested test functions, sources or times."""


class Beta2(NamedTuple):
    """Constant of the two dimensional Nash inequality.

    value is (H^2 / (2 h^2)) (H + M^2 / (2 h)), sharp the constant
    4 alpha_2 (H^2 / h^2) (H + M^2 / (2 h)) of the proof.
    """

    value: float
    sharp: float


def beta2(constants: TilingConstants) -> Beta2:
    """beta_2 of a tiling from its constants h, H and M."""
    h, big_h, m = constants.h, constants.H, constants.M
    factor = big_h**2 / h**2 * (big_h + m**2 / (2.0 * h))
    return Beta2(0.5 * factor, 4.0 * setting("nash.alpha2") * factor)


def gamma1() -> float:
    """(beta_1 / 2)^(1/2)"""
    return math.sqrt(0.5 * setting("nash.beta1"))


def transition_time(beta: float) -> float:
    """Time beta^2 / 3 where the two regimes of the ultracontractive bound meet."""
    return beta**2 / 3.0


def ultracontractive_bound(t: float, beta: float) -> Tuple[float, str]:
    """min(sqrt(3) t^-1/2, beta t^-1) and the regime that binds."""
    if t <= transition_time(beta):
        return math.sqrt(3.0) / math.sqrt(t), REGIME_LOCAL
    return beta / t, REGIME_GLOBAL


def nash_ratio(
    f: GraphFunction,
    mu: int,
    beta: Optional[float] = None,
    robin_b: RobinWeights = None,
    alpha: Coefficient = None,
) -> Optional[float]:
    """||f||_2^(2+4/mu) / (beta_mu Q(f) ||f||_1^(4/mu)), None if degenerate.

    Without beta the constant beta_1 = 6 or the beta_2 of the tiling
    underlying f is used.
    """
    return nash_record(f, mu, beta, robin_b, alpha).ratio


def nash_record(
    f: GraphFunction,
    mu: int,
    beta: Optional[float] = None,
    robin_b: RobinWeights = None,
    alpha: Coefficient = None,
    name: Optional[str] = None,
) -> CheckRecord:
    """Nash inequality of dimension mu as a check record."""
    if mu not in (1, 2):
        raise ValueError(f"Nash inequality of dimension {mu} is not implemented")
    if beta is None:
        beta = setting("nash.beta1") if mu == 1 else beta2(f.graph.constants).value
    integrals = f.integrals
    energy = dirichlet_energy(f, robin_b, alpha)
    lhs = integrals.l2sq ** (1.0 + 2.0 / mu)
    rhs = beta * energy * integrals.l1 ** (4.0 / mu)
    return CheckRecord(name or f"nash{mu}", lhs, rhs, metadata={"beta": beta})


def sample_functions(
    graph: MetricGraph, count: int, seed: Any, mesh: Optional[Mesh] = None
) -> List[GraphFunction]:
    """Random nonnegative test functions supported away from the window boundary.

    Support radii lie between one and three cell diameters.

    Raises:
        ClearanceError: no vertex is far enough from the window boundary
    """
    mesh = mesh or Mesh(graph)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cell = graph.cell_diameter
    floor = max(cell, 2.5 * mesh.max_segment)
    distances = graph.boundary_vertex_distances
    functions = []
    for _ in range(count):
        radius = float(rng.uniform(floor, 3.0 * floor))
        candidates = np.flatnonzero(distances > radius)
        if candidates.size == 0:
            radius = floor
            candidates = np.flatnonzero(distances > radius)
        if candidates.size == 0:
            raise ClearanceError("window too small for compactly supported test functions")
        center = int(candidates[rng.integers(candidates.size)])
        functions.append(random_test_function(graph, rng, center, radius, mesh=mesh))
    return functions


def nash_suite(functions: Sequence[GraphFunction], lift: bool = True) -> List[CheckRecord]:
    """Both Nash inequalities and the steps of their proofs for every function."""
    records: List[CheckRecord] = []
    for index, f in enumerate(functions):
        batch = [nash_record(f, 1), nash_record(f, 2)]
        if lift:
            batch.append(nash1_via_lift(f).record)
            batch.extend(nash2_via_extension(f))
        records.extend(_tagged(batch, function=index))
    return records


def _tagged(records: Sequence[CheckRecord], **metadata: Any) -> List[CheckRecord]:
    return [
        CheckRecord(
            record.name,
            record.lhs,
            record.rhs,
            record.tolerance,
            {**record.metadata, **metadata},
            record.truncation_limited,
        )
        for record in records
    ]


def ultracontractive_check(
    laplacian: DiscreteLaplacian,
    times: Sequence[float],
    beta: Optional[float] = None,
    sources: Optional[Sequence[GraphPoint]] = None,
    scheme: Optional[Scheme] = None,
) -> Tuple[List[CheckRecord], List[SupNormEstimate]]:
    """sup_x k(t, x, x) against min(sqrt(3) t^-1/2, beta t^-1) for every t.

    The records allow the discretization allowance of the defaults. Times at
    which no source keeps the front clearance give truncation-limited
    records.
    """
    graph = laplacian.graph
    beta = beta if beta is not None else beta2(graph.constants).value
    if sources is None:
        sources = core_sources(graph, setting("report.max_sources"))
    estimates = sup_norm_estimates(laplacian, times, sources, scheme)
    records = []
    for estimate in estimates:
        bound, regime = ultracontractive_bound(estimate.t, beta)
        records.append(
            CheckRecord(
                "ultracontractive",
                estimate.estimate,
                bound,
                tolerance=setting("checks.ultra_allowance"),
                metadata={
                    "t": estimate.t,
                    "regime": regime,
                    "t_star": transition_time(beta),
                    "sources": len(estimate.sources),
                    "excluded": len(estimate.excluded),
                    "truncation_dominated": estimate.truncation_dominated,
                },
                truncation_limited=estimate.truncation_limited,
            )
        )
        logger().info(
            "t=%g: estimate %g, bound %g (%s regime)", estimate.t, estimate.estimate, bound, regime
        )
    return records, estimates


def ultra_series_csv(records: Sequence[CheckRecord]) -> str:
    """CSV with the columns t, bound, estimate and regime."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["t", "bound", "estimate", "regime"])
    for record in records:
        if record.name == "ultracontractive":
            writer.writerow(
                [repr(record.metadata["t"]), repr(record.rhs), repr(record.lhs), record.metadata["regime"]]
            )
    return buffer.getvalue()


def observed_crossover(
    estimates: Sequence[SupNormEstimate], threshold: float = -0.75
) -> Optional[float]:
    """Time where the log-log slope of the estimate first falls below threshold.

    The slope is -1/2 in the one dimensional and -1 in the two dimensional
    regime. Truncation limited or dominated estimates are skipped. The
    crossing is interpolated linearly in log t between the midpoints of the
    two intervals whose slopes enclose the threshold.
    """
    usable = sorted(
        (item.t, item.estimate)
        for item in estimates
        if not (item.truncation_limited or item.truncation_dominated) and item.estimate > 0.0
    )
    if len(usable) < 3:
        return None
    log_t = np.log([t for t, _ in usable])
    log_k = np.log([k for _, k in usable])
    slopes = np.diff(log_k) / np.diff(log_t)
    centers = 0.5 * (log_t[1:] + log_t[:-1])
    for i in range(1, len(slopes)):
        if slopes[i - 1] > threshold >= slopes[i]:
            weight = (slopes[i - 1] - threshold) / (slopes[i - 1] - slopes[i])
            return float(math.exp(centers[i - 1] + weight * (centers[i] - centers[i - 1])))
    return None


def gaussian_shape(t: float, d: Any) -> Any:
    """min(t^-1/2 (1 + d^2/t)^1/2, t^-1 (1 + d^2/t))"""
    spread = 1.0 + np.square(d) / t
    return np.minimum(np.sqrt(spread / t), spread / t)


@dataclass(frozen=True)
class GaussianFit:
    """Fitted constant of the Gaussian upper bound.

    samples holds (t, d, k(t, x, y)) for all pairs with d^2 / t within the
    cap. min_kernel is the smallest kernel value seen on the whole mesh.
    """

    eta_fit: float
    samples: Tuple[Tuple[float, float, float], ...]
    records: Tuple[CheckRecord, ...]
    min_kernel: float


def gaussian_check(
    laplacian: DiscreteLaplacian,
    sources: Sequence[GraphPoint],
    targets: Sequence[GraphPoint],
    times: Sequence[float],
    scheme: Optional[Scheme] = None,
) -> GaussianFit:
    """Fit eta in k(t,x,y) <= eta min{...} e^{-d^2/4t} over a sample grid.

    Only sources keeping the front clearance at t enter. Every sample gives
    a record against the fitted bound, so all of them pass unless the fit
    fails. A positivity record covers the whole mesh.

    Raises:
        ClearanceError: no source keeps the front clearance at any time
    """
    mesh = laplacian.mesh
    cap = setting("checks.gauss_max_d2_over_t")
    target_nodes = np.array([mesh.nearest_node(target) for target in targets], dtype=int)
    samples: List[Tuple[float, float, float]] = []
    min_kernel, peak = math.inf, 0.0
    for source in sources:
        node = mesh.nearest_node(source)
        allowed = [t for t in times if admissible_sources(laplacian.graph, t, [source])[0]]
        if not allowed:
            continue
        distances = mesh.node_distances(node)[target_nodes]
        peak = max(peak, 1.0 / float(laplacian.mass[node]))
        for t, column in zip(allowed, heat_kernel_columns(laplacian, source, allowed, scheme)):
            min_kernel = min(min_kernel, float(column.values.min()))
            for d, k in zip(distances, column.values[target_nodes]):
                if d**2 / t <= cap:
                    samples.append((float(t), float(d), float(k)))
    if not samples:
        raise ClearanceError("no (source, time) pair keeps the front clearance")
    table = np.array(samples)
    t, d, k = table[:, 0], table[:, 1], table[:, 2]
    envelope = gaussian_shape(t, d) * np.exp(-(d**2) / (4.0 * t))
    eta_fit = float(np.max(k / envelope))
    records = [
        CheckRecord("gaussian", float(kernel), eta_fit * float(bound), metadata={"t": float(time), "d": float(dist)})
        for time, dist, kernel, bound in zip(t, d, k, envelope)
    ]
    records.append(
        CheckRecord(
            "kernel_positivity",
            max(0.0, -min_kernel),
            setting("checks.positivity_floor") * peak,
            metadata={"min_kernel": min_kernel},
        )
    )
    logger().info("Gaussian fit over %d samples: eta %g", len(samples), eta_fit)
    return GaussianFit(eta_fit, tuple(samples), tuple(records), min_kernel)


def locate_point(graph: MetricGraph, xy: Sequence[float]) -> GraphPoint:
    """Graph point nearest to a point of the plane."""
    start = graph.points[graph.edges[:, 0]]
    direction = graph.points[graph.edges[:, 1]] - start
    squared = np.einsum("ij,ij->i", direction, direction)
    along = np.clip(np.einsum("ij,ij->i", np.asarray(xy, dtype=float) - start, direction) / squared, 0.0, 1.0)
    foot = start + along[:, None] * direction
    edge = int(np.argmin(np.linalg.norm(foot - np.asarray(xy, dtype=float), axis=1)))
    return GraphPoint(edge, float(along[edge] * graph.lengths[edge]))


def gaussian_targets(
    graph: MetricGraph, source: GraphPoint, t_max: float, count: int = 24
) -> List[GraphPoint]:
    """Vertices within the Gaussian range sqrt(cap t_max) of a source, nearest first."""
    reach = math.sqrt(setting("checks.gauss_max_d2_over_t") * t_max)
    distances = vertex_distances(graph, source, cutoff=reach)
    order = [int(v) for v in np.argsort(distances, kind="stable") if np.isfinite(distances[v])]
    return [graph.vertex_point(vertex) for vertex in order[:count]]


@dataclass(frozen=True)
class StabilityReport:
    """Fitted eta on the base run, under mesh refinement and window growth."""

    eta_base: float
    eta_refined: float
    eta_grown: Optional[float]
    record: CheckRecord


def _laplacian_for(tiling: Tiling, mesh_size: Optional[float], truncation: str) -> DiscreteLaplacian:
    return assemble(build_skeleton(tiling), mesh_size, truncation=truncation)


def gaussian_stability(
    tiling: Tiling,
    sources_xy: Sequence[Sequence[float]],
    targets_xy: Sequence[Sequence[float]],
    times: Sequence[float],
    mesh_size: Optional[float] = None,
    scheme: Optional[Scheme] = None,
    truncation: Optional[str] = None,
) -> StabilityReport:
    """Refit eta with the mesh halved and with the window grown by half.

    Sources and targets are given in the plane so that they can be found on
    every graph. The window is only grown for the regular tilings.
    """
    truncation = truncation or setting("semigroup.truncation")

    def fit(laplacian: DiscreteLaplacian) -> float:
        graph = laplacian.graph
        sources = [locate_point(graph, xy) for xy in sources_xy]
        targets = [locate_point(graph, xy) for xy in targets_xy]
        return gaussian_check(laplacian, sources, targets, times, scheme).eta_fit

    base = _laplacian_for(tiling, mesh_size, truncation)
    size = base.mesh.mesh_size
    eta_base = fit(base)
    eta_refined = fit(_laplacian_for(tiling, 0.5 * size, truncation))
    eta_grown = None
    if tiling.kind != "custom" and tiling.side is not None:
        grown = make_regular_tiling(tiling.kind, tiling.side, tiling.window.grown(1.5))
        eta_grown = fit(_laplacian_for(grown, size, truncation))
    changes = [abs(eta_refined - eta_base)]
    if eta_grown is not None:
        changes.append(abs(eta_grown - eta_base))
    record = CheckRecord(
        "gaussian_eta_stability",
        max(changes) / eta_base,
        setting("checks.eta_stability"),
        metadata={"eta_base": eta_base, "eta_refined": eta_refined, "eta_grown": eta_grown},
    )
    return StabilityReport(eta_base, eta_refined, eta_grown, record)


def transition_report(
    tiling: Tiling, dilations: Sequence[float]
) -> Tuple[List[TransitionRowDict], List[CheckRecord]]:
    """t*(lambda) = (lambda beta)^2 / 3 for every dilation factor.

    recomputed_t_star comes from the constants of the dilated tiling itself.
    The records compare t*(lambda) / t*(1) with lambda^2 in both directions.
    """
    beta = beta2(tiling.constants).value
    base = transition_time(beta)
    rows: List[TransitionRowDict] = []
    records = []
    for factor in dilations:
        t_star = transition_time(factor * beta)
        recomputed = transition_time(beta2(tiling_constants(dilate(tiling, factor))).value)
        ratio = t_star / base
        rows.append(
            {
                "dilation": float(factor),
                "beta2": factor * beta,
                "t_star": t_star,
                "ratio": ratio,
                "recomputed_t_star": recomputed,
            }
        )
        for name, value in (("transition_scaling", ratio), ("transition_recomputed", recomputed / base)):
            records.append(CheckRecord(name, value, factor**2, metadata={"dilation": float(factor)}))
            records.append(CheckRecord(name + "_lower", factor**2, value, metadata={"dilation": float(factor)}))
    return rows, records


def robin_variant_check(
    laplacian: DiscreteLaplacian,
    functions: Sequence[GraphFunction],
    robin_b: float = 1.0,
    times: Sequence[float] = (0.5,),
    sources: Optional[Sequence[GraphPoint]] = None,
    scheme: Optional[Scheme] = None,
) -> List[CheckRecord]:
    """Nash inequalities for Q_b and domination of the kernel diagonal.

    Q_b >= Q, so both Nash inequalities keep holding with Robin weights and
    k_b(t, x, x) <= k(t, x, x). A doubled coefficient doubles the energy.
    """
    records = []
    for index, f in enumerate(functions):
        records.extend(
            _tagged(
                [
                    nash_record(f, 1, robin_b=robin_b, name="nash1_robin"),
                    nash_record(f, 2, robin_b=robin_b, name="nash2_robin"),
                    CheckRecord("coefficient_doubling", dirichlet_energy(f, alpha=2.0), 2.0 * dirichlet_energy(f)),
                ],
                function=index,
            )
        )
    graph = laplacian.graph
    if sources is None:
        sources = core_sources(graph, setting("report.max_sources"))
    robin = assemble(laplacian.mesh, robin_b=robin_b, truncation=laplacian.truncation)
    plain = kernel_diagonal(laplacian, sources, times, scheme)
    damped = kernel_diagonal(robin, sources, times, scheme)
    for i, source in enumerate(sources):
        for j, t in enumerate(times):
            records.append(
                CheckRecord(
                    "robin_domination",
                    float(damped[i, j]),
                    float(plain[i, j]),
                    metadata={"t": float(t), "edge": source.edge, "offset": source.offset},
                )
            )
    return records


@dataclass
class BoundsReport:
    # pylint: disable=too-many-instance-attributes
    """All checks of one run together with the constants of the tiling.

    Public methods:
        to_dict(), to_json(), to_table()
    """

    tiling_id: str
    constants: TilingConstants
    beta2: Beta2
    records: List[CheckRecord] = field(default_factory=list)
    transition: List[TransitionRowDict] = field(default_factory=list)
    observed_crossover: Optional[float] = None
    eta_fit: Optional[float] = None
    config: Dict[str, Any] = field(default_factory=dict)
    generated_at: str = ""

    @property
    def beta1(self) -> float:
        return float(setting("nash.beta1"))

    @property
    def gamma1(self) -> float:
        return gamma1()

    @property
    def gamma2(self) -> float:
        return self.beta2.value

    @property
    def t_star(self) -> float:
        return transition_time(self.beta2.value)

    @property
    def failing(self) -> List[str]:
        return failing(self.records)

    @property
    def passed(self) -> bool:
        return not self.failing

    def to_dict(self) -> ReportDict:
        """Report document."""
        return {
            "schema_version": SCHEMA_VERSION,
            "generated_at": self.generated_at,
            "tiling_id": self.tiling_id,
            "constants": self.constants.as_dict(),
            "beta1": self.beta1,
            "beta2": self.beta2.value,
            "beta2_sharp": self.beta2.sharp,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "t_star": self.t_star,
            "observed_crossover": self.observed_crossover,
            "eta_fit": self.eta_fit,
            "kernel_norm_method": KERNEL_NORM_METHOD,
            "transition": list(self.transition),
            "records": [record.as_dict() for record in self.records],
            "passed": self.passed,
            "config": dict(self.config),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def to_table(self) -> str:
        """Human readable summary: constants and pass counts per check."""
        lines = [
            f"tiling {self.tiling_id}",
            f"h={self.constants.h:.6g} H={self.constants.H:.6g} M={self.constants.M:.6g}",
            f"beta1={self.beta1:g} beta2={self.beta2.value:.6g} (sharp {self.beta2.sharp:.6g})",
            f"gamma1={self.gamma1:.6g} gamma2={self.gamma2:.6g} t*={self.t_star:.6g}",
            f"observed crossover: {_optional(self.observed_crossover)}",
            f"eta fit: {_optional(self.eta_fit)}",
            "",
            f"{'check':<28}{'total':>7}{'pass':>7}{'fail':>7}{'other':>7}{'max ratio':>14}",
        ]
        names = sorted({record.name for record in self.records})
        for name in names:
            group = [record for record in self.records if record.name == name]
            statuses = [record.status for record in group]
            ratios = [record.ratio for record in group if record.ratio is not None]
            lines.append(
                f"{name:<28}{len(group):>7}{statuses.count('pass'):>7}"
                f"{statuses.count('fail'):>7}"
                f"{len(group) - statuses.count('pass') - statuses.count('fail'):>7}"
                f"{_optional(max(ratios) if ratios else None):>14}"
            )
        if self.transition:
            lines.extend(["", f"{'dilation':>10}{'beta2':>14}{'t*':>14}{'ratio':>10}"])
            for row in self.transition:
                lines.append(
                    f"{row['dilation']:>10g}{row['beta2']:>14.6g}{row['t_star']:>14.6g}{row['ratio']:>10.6g}"
                )
        lines.append("")
        lines.append("PASSED" if self.passed else "FAILED: " + ", ".join(sorted(set(self.failing))))
        return "\n".join(lines) + "\n"


def _optional(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def tiling_of(config: RunConfig) -> Tiling:
    """Tiling described by the tiling section of a run configuration."""
    section = config.tiling
    if section.path is not None:
        return load_tiling(section.path)
    return make_regular_tiling(section.kind, section.side, section.window)


def build_report(config: RunConfig, tiling: Optional[Tiling] = None) -> BoundsReport:
    # pylint: disable=too-many-locals
    """Run every check of a report configuration.

    The random functions are drawn from one generator seeded with
    config.seed, so a configuration reproduces its report.
    """
    tiling = tiling or tiling_of(config)
    graph = build_skeleton(tiling)
    constants = graph.constants
    beta = beta2(constants)
    rng = np.random.default_rng(config.seed)
    scheme = scheme_mapping[config.scheme]()
    laplacian = assemble(graph, config.mesh_size, truncation=config.truncation)
    mesh = laplacian.mesh

    functions = sample_functions(graph, config.report_n_functions(), rng, mesh)
    records = nash_suite(functions)

    ultra, estimates = ultracontractive_check(laplacian, config.report_times(), beta.value, scheme=scheme)
    records.extend(ultra)

    gauss_times = config.report_gauss_times()
    sources = core_sources(graph, setting("report.max_sources"))
    targets = gaussian_targets(graph, sources[0], max(gauss_times))
    fit = gaussian_check(laplacian, sources, targets, gauss_times, scheme)
    records.extend(fit.records)
    if config.stability:
        stability = gaussian_stability(
            tiling,
            [graph.point_coordinates(source) for source in sources],
            [graph.point_coordinates(target) for target in targets],
            gauss_times,
            mesh.mesh_size,
            scheme,
            config.truncation,
        )
        records.append(stability.record)

    transition, transition_records = transition_report(tiling, config.report_dilations())
    records.extend(transition_records)
    records.extend(
        robin_variant_check(
            laplacian, functions[:3], config.robin_b, gauss_times[:1], sources, scheme
        )
    )
    report = BoundsReport(
        tiling.tiling_id,
        constants,
        beta,
        records,
        transition,
        observed_crossover(estimates),
        fit.eta_fit,
        config.to_dict(),
        datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    )
    logger().info("Report with %d records, %d failing", len(records), len(report.failing))
    return report
