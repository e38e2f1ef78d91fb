"""Nash constants, ultracontractive and Gaussian bounds, transition times"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tileheat.bounds import (REGIME_GLOBAL, REGIME_LOCAL, BoundsReport,
                             ClearanceError,
                             beta2, build_report, gamma1, gaussian_check,
                             gaussian_shape, gaussian_stability,
                             gaussian_targets, locate_point, nash_ratio,
                             nash_record, nash_suite, observed_crossover,
                             robin_variant_check, sample_functions,
                             transition_report, transition_time,
                             ultra_series_csv, ultracontractive_bound,
                             ultracontractive_check)
from tileheat.config import RunConfig, TilingConfig
from tileheat.functions import GraphFunction, Mesh, hat_function
from tileheat.geometry import TilingConstants, make_regular_tiling
from tileheat.semigroup import SupNormEstimate, assemble, core_sources
from tileheat.skeleton import GraphPoint, build_skeleton

from .conftest import unit_edge

UNIT_SQUARES = TilingConstants(0.5, 0.5, 4.0, 1.0)
TRIANGLES = TilingConstants(1.0 / (2.0 * math.sqrt(3.0)), 1.0 / (2.0 * math.sqrt(3.0)), 3.0, 1.0)
SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
ACCEPTANCE_TIMES = (0.01, 0.1, 1.0, 5.0, 20.0, 22.6875, 30.0, 50.0)


def test_beta2_of_unit_squares():
    value, sharp = beta2(UNIT_SQUARES)
    assert value == pytest.approx(8.25)
    assert sharp == pytest.approx(4.0 * 0.087 * 16.5)


def test_beta2_of_triangles():
    assert beta2(TRIANGLES).value == pytest.approx(7.938, abs=5e-4)


@given(factor=st.floats(min_value=0.01, max_value=100.0))
def test_beta2_scales_linearly(factor):
    assert beta2(UNIT_SQUARES.scaled(factor)).value == pytest.approx(factor * 8.25, rel=1e-12)


def test_gamma1_and_transition_time():
    assert gamma1() == pytest.approx(math.sqrt(3.0))
    assert transition_time(8.25) == pytest.approx(22.6875)


def test_ultracontractive_bound_regimes():
    bound, regime = ultracontractive_bound(0.01, 8.25)
    assert bound == pytest.approx(math.sqrt(3.0) / 0.1)
    assert regime == REGIME_LOCAL
    bound, regime = ultracontractive_bound(50.0, 8.25)
    assert bound == pytest.approx(8.25 / 50.0)
    assert regime == REGIME_GLOBAL
    t_star = transition_time(8.25)
    assert ultracontractive_bound(t_star, 8.25)[0] == pytest.approx(8.25 / t_star)


def test_nash_ratios_of_a_hat():
    hat = hat_function(Mesh(unit_edge(), 0.25), 0)
    assert nash_ratio(hat, 1) == pytest.approx(4.0 / 27.0 / 6.0)
    assert nash_ratio(hat, 2, beta=8.25) == pytest.approx((1.0 / 9.0) / 8.25)


def test_nash2_ratio_uses_tiling_constants(grid4):
    edge = grid4.edge_between(grid4.nearest_vertex((2, 2)), grid4.nearest_vertex((2, 3)))
    hat = hat_function(Mesh(grid4), edge)
    record = nash_record(hat, 2)
    assert record.metadata["beta"] == pytest.approx(8.25)
    assert record.ratio == pytest.approx(0.013468, rel=1e-4)


def test_nash_ratio_degenerate_and_invalid():
    mesh = Mesh(unit_edge(), 0.25)
    assert nash_ratio(GraphFunction.constant(mesh, 0.0), 1) is None
    with pytest.raises(ValueError):
        nash_ratio(hat_function(mesh, 0), 3)


@given(factor=st.floats(min_value=1e-3, max_value=1e3))
def test_nash_ratio_scale_invariant(grid4, factor):
    f = GraphFunction.from_callable(
        Mesh(grid4, 0.25), lambda xy: np.clip(1.5 - np.hypot(xy[:, 0] - 2, xy[:, 1] - 2), 0, None)
    )
    for mu in (1, 2):
        assert nash_ratio(factor * f, mu) == pytest.approx(nash_ratio(f, mu), rel=1e-9)


def _check_nash(graphs, seed):
    for graph in graphs.values():
        for f in sample_functions(graph, 2, seed):
            assert nash_ratio(f, 1) <= 1.0
            assert nash_ratio(f, 2) <= 1.0


@given(seed=SEEDS)
def test_nash_holds_on_random_functions(regular_graphs, seed):
    _check_nash(regular_graphs, seed)


@pytest.mark.slow
@settings(settings.get_profile("acceptance"))
@given(seed=SEEDS)
def test_nash_acceptance(regular_graphs, seed):
    _check_nash(regular_graphs, seed)


def test_sample_functions_are_reproducible(square_graph):
    mesh = Mesh(square_graph)
    first = sample_functions(square_graph, 3, 42, mesh)
    again = sample_functions(square_graph, 3, 42, mesh)
    for a, b in zip(first, again):
        assert np.array_equal(a.values, b.values)


def test_sample_functions_need_room():
    tiny = build_skeleton(make_regular_tiling("square", 1.0, "0,0,2,2"))
    with pytest.raises(ClearanceError):
        sample_functions(tiny, 1, 0)


def test_nash_suite(square_graph):
    records = nash_suite(sample_functions(square_graph, 3, 1))
    names = {record.name for record in records}
    assert names == {
        "nash1",
        "nash2",
        "nash1_lift",
        "nash2_extension_l2",
        "nash2_extension_l1",
        "nash2_extension_dirichlet",
    }
    assert all(record.passed for record in records)
    assert {record.metadata["function"] for record in records} == {0, 1, 2}


def test_transition_report_of_unit_squares():
    tiling = make_regular_tiling("square", 1.0, "0,0,4,4")
    rows, records = transition_report(tiling, [1.0, 2.0, 3.0])
    assert [row["t_star"] for row in rows] == pytest.approx([22.6875, 90.75, 204.1875])
    assert [row["ratio"] for row in rows] == pytest.approx([1.0, 4.0, 9.0], rel=1e-12)
    assert [row["recomputed_t_star"] for row in rows] == pytest.approx(
        [22.6875, 90.75, 204.1875], rel=1e-9
    )
    assert all(record.passed for record in records)
    assert len(records) == 12


def test_gaussian_shape_branches_meet():
    t = 2.0
    d = math.sqrt(t * (t - 1.0))
    assert gaussian_shape(t, d) == pytest.approx(1.0)
    assert gaussian_shape(0.01, 0.0) == pytest.approx(10.0)
    assert gaussian_shape(100.0, 0.0) == pytest.approx(0.01)


def _estimates(times, kernel):
    return [
        SupNormEstimate(t, kernel(t), (kernel(t),), (GraphPoint(0, 0.0),), (), False, False)
        for t in times
    ]


def test_observed_crossover():
    tau = 4.0
    times = np.logspace(-2, 3, 41)
    estimates = _estimates(times, lambda t: 1.0 / (math.sqrt(t) * (1.0 + math.sqrt(t / tau))))
    assert observed_crossover(estimates) == pytest.approx(tau, rel=0.1)


def test_observed_crossover_needs_a_transition():
    assert observed_crossover(_estimates(np.logspace(-2, 0, 5), lambda t: t**-0.5)) is None
    assert observed_crossover(_estimates([0.1, 1.0], lambda t: 1.0 / t)) is None


def test_locate_point(grid4):
    point = locate_point(grid4, (1.0, 0.4))
    assert grid4.point_coordinates(point) == pytest.approx([1.0, 0.4])
    assert locate_point(grid4, (0.0, 0.0)).offset in (0.0, 1.0)


def test_gaussian_targets(square_graph):
    source = square_graph.vertex_point(square_graph.nearest_vertex((3, 3)))
    targets = gaussian_targets(square_graph, source, 0.03, count=100)
    assert len(targets) == 1
    targets = gaussian_targets(square_graph, source, 0.5, count=10)
    assert len(targets) == 10
    assert targets[0] == source


def test_gaussian_fit(regular_graphs):
    graph = regular_graphs["square"]
    laplacian = assemble(graph, 0.125)
    sources = core_sources(graph, 1)
    targets = gaussian_targets(graph, sources[0], 1.0)
    fit = gaussian_check(laplacian, sources, targets, [0.5, 1.0])
    assert 0.0 < fit.eta_fit < 10.0
    assert all(record.passed for record in fit.records)
    assert fit.records[-1].name == "kernel_positivity"
    assert all(25.0 >= d * d / t for t, d, _ in fit.samples)


def test_gaussian_fit_needs_clearance(square_graph):
    laplacian = assemble(square_graph, 0.125)
    corner = square_graph.vertex_point(square_graph.nearest_vertex((0, 0)))
    with pytest.raises(ClearanceError):
        gaussian_check(laplacian, [corner], [corner], [1.0])


@pytest.mark.slow
def test_gaussian_constant_is_stable():
    tiling = make_regular_tiling("square", 1.0, "0,0,10,10")
    report = gaussian_stability(tiling, [(5.0, 5.0)], [(5.0, 5.0), (6.0, 5.0), (7.0, 6.0)], [0.5, 1.0], 0.125)
    assert report.record.passed
    assert report.eta_grown is not None


def test_ultracontractive_check(square_graph):
    laplacian = assemble(square_graph, 0.0625)
    records, estimates = ultracontractive_check(laplacian, [0.02, 0.1, 0.2, 50.0])
    assert [record.status for record in records[:3]] == ["pass"] * 3
    assert records[-1].status == "truncation-limited"
    assert records[0].metadata["regime"] == REGIME_LOCAL
    assert estimates[-1].truncation_limited
    lines = ultra_series_csv(records).splitlines()
    assert lines[0] == "t,bound,estimate,regime"
    assert len(lines) == 5


@pytest.mark.slow
def test_ultracontractive_two_regimes_on_large_grid():
    graph = build_skeleton(make_regular_tiling("square", 1.0, "0,0,50,50"))
    records, _ = ultracontractive_check(assemble(graph, 0.0625), ACCEPTANCE_TIMES)
    assert [record.status for record in records] == ["pass"] * len(ACCEPTANCE_TIMES)
    assert all(record.lhs <= 1.05 * record.rhs for record in records)
    assert [record.metadata["regime"] for record in records] == [REGIME_LOCAL] * 6 + [REGIME_GLOBAL] * 2
    assert records[0].metadata["t_star"] == pytest.approx(22.6875)


def test_robin_variant(square_graph):
    laplacian = assemble(square_graph, 0.125)
    functions = sample_functions(square_graph, 2, 3, laplacian.mesh)
    records = robin_variant_check(laplacian, functions, 1.0, (0.1, 0.5))
    names = [record.name for record in records]
    assert names.count("robin_domination") == 2 * len(core_sources(square_graph, 3))
    assert names.count("coefficient_doubling") == 2
    assert all(record.passed for record in records)


def test_report_document(square_graph):
    report = BoundsReport("abc", square_graph.constants, beta2(square_graph.constants))
    document = report.to_dict()
    assert document["beta2"] == pytest.approx(8.25)
    assert document["t_star"] == pytest.approx(22.6875)
    assert document["gamma1"] == pytest.approx(math.sqrt(3.0))
    assert document["passed"] is True
    assert report.to_table().endswith("PASSED\n")


@pytest.mark.slow
def test_build_report():
    config = RunConfig(
        tiling=TilingConfig(window="8"),
        n_functions=3,
        times=(0.01, 0.1, 0.5),
        gauss_times=(0.5,),
        stability=False,
        mesh_size=0.125,
    )
    report = build_report(config)
    assert report.passed, report.failing
    assert report.beta2.value == pytest.approx(8.25)
    assert len(report.transition) == 3
    assert report.eta_fit is not None
    assert report.config["seed"] == 0
