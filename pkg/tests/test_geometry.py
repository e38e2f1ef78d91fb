"""Tilings, incircles and tiling constants"""

import math
import runpy

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tileheat.geometry import (EmptyWindowError, NoIncircleError,
                               NonConvexPolygonError, OverlapError, Polygon,
                               TilingError, Window, clip_polygon,
                               corner_points, dilate, incircle, load_tiling,
                               make_regular_tiling, polygon_area,
                               rigid_motion, save_tiling, tiling_constants)

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]
MIXED = {
    "polygons": [
        [[0, 0], [2, 0], [2, 2], [0, 2]],
        [[2, 0], [3, 0], [3, 1], [2, 1]],
        [[2, 1], [3, 1], [3, 2], [2, 2]],
    ]
}


def test_window_parse():
    assert Window.parse("40") == Window(0.0, 0.0, 40.0, 40.0)
    assert Window.parse("-1, -2, 3, 4").as_list() == [-1.0, -2.0, 3.0, 4.0]
    assert Window.parse([0, 0, 2, 1]).area == 2.0
    with pytest.raises(ValueError):
        Window.parse("1,2,3")
    with pytest.raises(EmptyWindowError):
        Window.parse("0,0,0,1")


def test_unit_square_grid():
    tiling = make_regular_tiling("square", 1.0, "0,0,4,4")
    assert len(tiling.polygons) == 16
    assert all(polygon.inradius == pytest.approx(0.5) for polygon in tiling.polygons)
    constants = tiling.constants
    assert (constants.h, constants.H, constants.M, constants.l_min) == pytest.approx(
        (0.5, 0.5, 4.0, 1.0)
    )


@pytest.mark.parametrize(
    "kind, inradius, perimeter",
    [
        ("square", 0.5, 4.0),
        ("triangular", 1.0 / (2.0 * math.sqrt(3.0)), 3.0),
        ("hexagonal", math.sqrt(3.0) / 2.0, 6.0),
    ],
)
def test_regular_constants(kind, inradius, perimeter):
    tiling = make_regular_tiling(kind, 1.0, "0,0,8,8")
    constants = tiling.constants
    assert constants.h == pytest.approx(inradius, rel=1e-9)
    assert constants.H == pytest.approx(inradius, rel=1e-9)
    assert constants.M == pytest.approx(perimeter, rel=1e-12)
    assert constants.l_min == pytest.approx(1.0, rel=1e-9)
    assert tiling.kind == kind


@pytest.mark.parametrize("kind", ["square", "triangular", "hexagonal"])
def test_regular_tiling_covers_window(kind):
    tiling = make_regular_tiling(kind, 1.0, "0,0,5,5")
    clipped = sum(
        polygon_area(clip_polygon(polygon.points, tiling.window.corners))
        for polygon in tiling.polygons
    )
    assert clipped == pytest.approx(25.0, rel=1e-9)


@pytest.mark.parametrize("kind", ["square", "triangular", "hexagonal"])
def test_tangential_area_identity(kind):
    for polygon in make_regular_tiling(kind, 1.0, "0,0,3,3").polygons:
        assert polygon.area == pytest.approx(0.5 * polygon.inradius * polygon.perimeter, rel=1e-9)


def test_incircle():
    center, radius = incircle(SQUARE)
    assert center == pytest.approx((0.5, 0.5))
    assert radius == pytest.approx(0.5)
    center, radius = incircle([[0, 0], [1, 0], [0.5, math.sqrt(3.0) / 2.0]])
    assert radius == pytest.approx(1.0 / (2.0 * math.sqrt(3.0)))
    assert center == pytest.approx((0.5, math.sqrt(3.0) / 6.0))


def test_incircle_clockwise_loop():
    _, radius = incircle(SQUARE[::-1])
    assert radius == pytest.approx(0.5)


def test_kite_is_tangential():
    polygon = Polygon.from_vertices([[0, -1], [3, 0], [0, 1], [-1, 0]])
    assert polygon.area == pytest.approx(0.5 * polygon.inradius * polygon.perimeter, rel=1e-9)


def test_rectangle_has_no_incircle():
    with pytest.raises(NoIncircleError) as info:
        incircle([[0, 0], [2, 0], [2, 1], [0, 1]], polygon_index=3)
    assert info.value.polygon_index == 3


def test_non_convex_polygon_named():
    document = {"polygons": [SQUARE, [[2, 0], [4, 0], [3, 0.5], [2, 2]]]}
    with pytest.raises(NonConvexPolygonError) as info:
        load_tiling(document)
    assert info.value.polygon_index == 1


def test_overlap_named():
    shifted = [[0.5, 0], [1.5, 0], [1.5, 1], [0.5, 1]]
    with pytest.raises(OverlapError) as info:
        load_tiling({"polygons": [SQUARE, shifted]})
    assert {info.value.polygon_index, info.value.other_index} == {0, 1}
    assert info.value.area == pytest.approx(0.5)


def test_empty_window():
    with pytest.raises(EmptyWindowError):
        make_regular_tiling("hexagonal", 10.0, "0,0,1,1")


def test_document_without_polygons():
    with pytest.raises(TilingError):
        load_tiling({"polygons": []})


def test_mixed_squares_not_edge_to_edge():
    tiling = load_tiling(MIXED)
    constants = tiling.constants
    assert (constants.h, constants.H, constants.M, constants.l_min) == pytest.approx(
        (0.5, 1.0, 8.0, 1.0)
    )
    assert tiling.window.as_list() == [0.0, 0.0, 3.0, 2.0]


@given(factor=st.floats(min_value=0.1, max_value=10.0))
def test_dilation_scales_constants(factor):
    tiling = make_regular_tiling("triangular", 1.0, "0,0,3,3")
    scaled = tiling_constants(dilate(tiling, factor))
    expected = tiling.constants.scaled(factor)
    for name in ("h", "H", "M", "l_min"):
        assert getattr(scaled, name) == pytest.approx(getattr(expected, name), rel=1e-9)


def test_dilation_rejects_nonpositive_factor():
    tiling = make_regular_tiling("square", 1.0, "0,0,2,2")
    with pytest.raises(ValueError):
        dilate(tiling, 0.0)


@given(
    angle=st.floats(min_value=0.0, max_value=2.0 * math.pi),
    shift=st.tuples(
        st.floats(min_value=-5.0, max_value=5.0), st.floats(min_value=-5.0, max_value=5.0)
    ),
)
def test_rigid_motion_keeps_constants(angle, shift):
    tiling = make_regular_tiling("hexagonal", 1.0, "0,0,4,4")
    moved = rigid_motion(tiling, angle, shift)
    for name in ("h", "H", "M", "l_min"):
        assert getattr(moved.constants, name) == pytest.approx(
            getattr(tiling.constants, name), rel=1e-9
        )


def test_tiling_id():
    first = make_regular_tiling("square", 1.0, "0,0,3,3")
    again = make_regular_tiling("square", 1.0, "0,0,3,3")
    other = make_regular_tiling("hexagonal", 1.0, "0,0,3,3")
    assert first.tiling_id == again.tiling_id
    assert first.tiling_id != other.tiling_id
    assert len(first.tiling_id) >= 6


def test_save_and_load(tmp_path):
    tiling = make_regular_tiling("triangular", 1.0, "0,0,3,3")
    path = tmp_path / "tiling.json"
    save_tiling(tiling, str(path))
    loaded = load_tiling(str(path))
    assert loaded.tiling_id == tiling.tiling_id
    assert loaded.kind == "triangular"
    assert np.allclose(loaded.window.as_list(), tiling.window.as_list())


def test_yaml_document(tmp_path):
    path = tmp_path / "tiling.yaml"
    path.write_text("polygons:\n  - [[0, 0], [1, 0], [1, 1], [0, 1]]\n", encoding="utf-8")
    tiling = load_tiling(str(path))
    assert len(tiling.polygons) == 1
    assert tiling.constants.h == pytest.approx(0.5)


def test_corner_points_merge_within_tolerance():
    left = Polygon.from_vertices([[0, 0], [1, 0], [1, 1], [0, 1]])
    right = Polygon(((1.0 + 1e-10, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0 - 1e-10)), (1.5, 0.5), 0.5)
    points, ids = corner_points([left, right], 1e-6)
    assert len(points) == 6
    assert ids == [(0, 1, 2, 3), (1, 4, 5, 2)]
    # merged corners keep the coordinates of their first appearance
    assert points[1].tolist() == [1.0, 0.0]
    assert points[2].tolist() == [1.0, 1.0]


def test_geometry_module_has_no_script_entry(capsys):
    runpy.run_module("tileheat.geometry", run_name="__main__")
    assert capsys.readouterr().out == ""
