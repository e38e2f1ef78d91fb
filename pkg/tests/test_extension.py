"""Polygon extension operator and its inequalities"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tileheat.extension import (choose_k, dirichlet_bound_terms,
                                evaluate_extension, extension_gradient,
                                extension_integrals, make_extension,
                                nash2_via_extension, quadrature_integrals,
                                triangle_decomposition,
                                verify_extension_bounds)
from tileheat.functions import (LoopFunction, Mesh, hat_function,
                                random_loop_function, random_test_function)
from tileheat.geometry import Polygon

ROOT3 = math.sqrt(3.0)
SQUARE = Polygon.from_vertices([[0, 0], [1, 0], [1, 1], [0, 1]])
TRIANGLE = Polygon.from_vertices([[0, 0], [1, 0], [0.5, ROOT3 / 2.0]])
HEXAGON = Polygon.from_vertices(
    [[math.cos(k * math.pi / 3.0), math.sin(k * math.pi / 3.0)] for k in range(6)]
)
KITE = Polygon.from_vertices([[0, -1], [3, 0], [0, 1], [-1, 0]])
POLYGONS = [SQUARE, TRIANGLE, HEXAGON, KITE]
SEEDS = st.integers(min_value=0, max_value=2**32 - 1)


def _constant_loop(polygon, value):
    offsets = [[0.0, length] for length in polygon.side_lengths]
    return LoopFunction.from_side_samples(polygon, offsets, [[value, value]] * polygon.n_sides)


def _one_side_hat(polygon):
    offsets, values = [], []
    for side, length in enumerate(polygon.side_lengths):
        offsets.append([0.0, 0.5 * length, length])
        values.append([0.0, 1.0 if side == 0 else 0.0, 0.0])
    return LoopFunction.from_side_samples(polygon, offsets, values)


@pytest.mark.parametrize(
    "polygon, foot, radius",
    [(SQUARE, 0.5, 0.5), (TRIANGLE, 0.5, 1.0 / (2.0 * ROOT3)), (HEXAGON, 0.5, ROOT3 / 2.0)],
)
def test_regular_decomposition(polygon, foot, radius):
    decomposition = triangle_decomposition(polygon)
    assert np.allclose(decomposition.lengths, 1.0)
    assert np.allclose(decomposition.feet, foot)
    assert decomposition.radius == pytest.approx(radius)
    assert np.allclose(decomposition.maxima, 0.5)
    assert decomposition.areas.sum() == pytest.approx(polygon.area)


def test_frames_round_trip():
    decomposition = triangle_decomposition(KITE)
    points = np.array([[0.2, 0.1], [-0.3, 0.0], [1.0, -0.2]])
    for index in range(decomposition.n_triangles):
        x, y = decomposition.to_local(index, points)
        assert np.allclose(decomposition.to_global(index, x, y), points)
        x, y = decomposition.to_local(index, np.asarray(KITE.incenter))
        assert y == pytest.approx(decomposition.radius)
        assert x == pytest.approx(decomposition.feet[index])


def test_choose_k():
    assert choose_k(_constant_loop(SQUARE, 2.5)) == pytest.approx(2.5)
    assert choose_k(_one_side_hat(SQUARE)) == 0.0
    loop = random_loop_function(HEXAGON, 5)
    assert choose_k(loop) <= loop.corner_values.min()
    assert choose_k(loop) <= loop.integrals.l1 / loop.perimeter


def test_choose_k_rejects_negative_values():
    with pytest.raises(ValueError):
        choose_k(_constant_loop(SQUARE, -1.0))


@pytest.mark.parametrize("polygon", POLYGONS)
def test_constant_extends_to_constant(polygon):
    field = make_extension(polygon, _constant_loop(polygon, 3.0))
    rng = np.random.default_rng(1)
    for _ in range(20):
        weights = rng.dirichlet(np.ones(polygon.n_sides))
        assert evaluate_extension(field, weights @ polygon.points) == pytest.approx(3.0)
    i1, i2, i_d = extension_integrals(field).totals
    assert i1 == pytest.approx(3.0 * polygon.area)
    assert i2 == pytest.approx(9.0 * polygon.area)
    assert i_d == pytest.approx(0.0, abs=1e-12)


def test_constant_on_unit_square():
    report = verify_extension_bounds(SQUARE, _constant_loop(SQUARE, 2.0))
    assert report.ineq1.ratio == pytest.approx(0.5)
    assert report.ineq2.ratio == pytest.approx(1.0)
    assert report.ineq3.status == "degenerate"
    assert report.passed


@pytest.mark.parametrize("polygon", POLYGONS)
def test_trace_and_apex(polygon):
    loop = random_loop_function(polygon, 11)
    field = make_extension(polygon, loop)
    assert evaluate_extension(field, polygon.incenter) == pytest.approx(field.k)
    start = 0.0
    for side, length in enumerate(polygon.side_lengths):
        a, b = polygon.points[side], polygon.points[(side + 1) % polygon.n_sides]
        for t in (0.0, 0.3, 0.77):
            value = evaluate_extension(field, a + t * (b - a))
            assert value == pytest.approx(float(loop.evaluate(start + t * length)), abs=1e-12)
        start += length


def test_outside_point():
    field = make_extension(SQUARE, _constant_loop(SQUARE, 1.0))
    with pytest.raises(ValueError):
        evaluate_extension(field, (2.0, 2.0))


@pytest.mark.parametrize("polygon", POLYGONS)
def test_continuous_across_rays(polygon):
    field = make_extension(polygon, random_loop_function(polygon, 4))
    apex = np.asarray(polygon.incenter)
    for corner in polygon.points:
        ray = apex - corner
        across = np.array([-ray[1], ray[0]]) / np.hypot(*ray)
        for t in (0.2, 0.5, 0.9):
            point = corner + t * ray
            left = evaluate_extension(field, point + 1e-9 * across)
            right = evaluate_extension(field, point - 1e-9 * across)
            assert left == pytest.approx(right, abs=1e-6)


@pytest.mark.parametrize("polygon", POLYGONS)
def test_gradient_matches_differences(polygon):
    field = make_extension(polygon, random_loop_function(polygon, 8, nodes_per_side=0))
    apex = np.asarray(polygon.incenter)
    step = 1e-6
    for side in range(polygon.n_sides):
        a, b = polygon.points[side], polygon.points[(side + 1) % polygon.n_sides]
        point = (a + b + apex) / 3.0
        gradient = extension_gradient(field, point)
        numeric = [
            (
                evaluate_extension(field, point + step * unit)
                - evaluate_extension(field, point - step * unit)
            )
            / (2.0 * step)
            for unit in np.eye(2)
        ]
        assert gradient == pytest.approx(numeric, rel=1e-5, abs=1e-7)


def test_no_gradient_at_incenter():
    field = make_extension(SQUARE, random_loop_function(SQUARE, 2))
    with pytest.raises(ValueError):
        extension_gradient(field, SQUARE.incenter)


def _check_triangle_identities(seed):
    for polygon in POLYGONS:
        loop = random_loop_function(polygon, seed)
        field = make_extension(polygon, loop)
        integrals = extension_integrals(field)
        decomposition = field.decomposition
        r = decomposition.radius
        for index in range(decomposition.n_triangles):
            offsets, values = field.side(index)
            side_l1 = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(offsets)))
            side_l2sq = float(
                np.sum(
                    (values[1:] ** 2 + values[1:] * values[:-1] + values[:-1] ** 2)
                    / 3.0
                    * np.diff(offsets)
                )
            )
            expected = r / 3.0 * side_l1 + decomposition.lengths[index] * field.k * r / 6.0
            assert integrals.l1[index] == pytest.approx(expected, rel=1e-10, abs=1e-14)
            assert integrals.l2sq[index] >= r / 4.0 * side_l2sq * (1.0 - 1e-12)


@given(seed=SEEDS)
def test_triangle_identities(seed):
    _check_triangle_identities(seed)


@pytest.mark.slow
@settings(settings.get_profile("acceptance"))
@given(seed=SEEDS)
def test_triangle_identities_acceptance(seed):
    _check_triangle_identities(seed)


@given(seed=SEEDS)
def test_quadrature_agrees_with_closed_forms(seed):
    for polygon in POLYGONS:
        field = make_extension(polygon, random_loop_function(polygon, seed))
        closed = extension_integrals(field)
        numeric = quadrature_integrals(field)
        for exact, approx in zip(closed, numeric):
            assert approx == pytest.approx(exact, rel=1e-10, abs=1e-12)


@given(seed=SEEDS)
def test_dirichlet_terms_add_up(seed):
    for polygon in POLYGONS:
        terms = dirichlet_bound_terms(make_extension(polygon, random_loop_function(polygon, seed)))
        scale = max(1.0, float(np.max(np.abs(terms.exact))))
        assert terms.identity_residual <= 1e-10 * scale
        assert np.all(terms.exact <= terms.bound * (1.0 + 1e-12) + 1e-14)


def _check_extension_bounds(seed):
    for polygon in POLYGONS:
        report = verify_extension_bounds(polygon, random_loop_function(polygon, seed))
        assert report.passed, [record.as_dict() for record in report.records]


@given(seed=SEEDS)
def test_extension_bounds_on_random_loops(seed):
    _check_extension_bounds(seed)


@pytest.mark.slow
@settings(settings.get_profile("acceptance"))
@given(seed=SEEDS)
def test_extension_bounds_acceptance(seed):
    _check_extension_bounds(seed)


def test_extension_of_one_side_hat():
    report = verify_extension_bounds(SQUARE, _one_side_hat(SQUARE))
    assert report.k == 0.0
    assert report.passed


def test_nash2_chain_on_hat(grid4):
    edge = grid4.edge_between(grid4.nearest_vertex((2, 2)), grid4.nearest_vertex((2, 3)))
    records = nash2_via_extension(hat_function(Mesh(grid4), edge))
    assert [record.name for record in records] == [
        "nash2_extension_l2",
        "nash2_extension_l1",
        "nash2_extension_dirichlet",
    ]
    assert all(record.passed for record in records)


@given(seed=SEEDS)
def test_nash2_chain_on_random_functions(regular_graphs, seed):
    for graph in regular_graphs.values():
        f = random_test_function(graph, seed, graph.nearest_vertex((5.0, 5.0)), 2.5)
        assert all(record.passed for record in nash2_via_extension(f))
