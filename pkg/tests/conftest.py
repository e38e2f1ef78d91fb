"""Shared fixtures of the tileheat test suite"""

import os
from datetime import timedelta

import pytest
from hypothesis import settings

from tileheat.geometry import make_regular_tiling
from tileheat.skeleton import MetricGraph, build_skeleton

settings.register_profile("default", deadline=timedelta(seconds=30), max_examples=25)
# sample counts of the acceptance runs, used by the tests marked slow
settings.register_profile("acceptance", deadline=None, max_examples=1000)
settings.load_profile(os.getenv("TILEHEAT_HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def square_tiling():
    """Unit squares on [0, 6]^2."""
    return make_regular_tiling("square", 1.0, "0,0,6,6")


@pytest.fixture(scope="session")
def square_graph(square_tiling):
    return build_skeleton(square_tiling)


@pytest.fixture(scope="session")
def grid4():
    """Skeleton of the unit squares on [0, 4]^2."""
    return build_skeleton(make_regular_tiling("square", 1.0, "0,0,4,4"))


@pytest.fixture(scope="session")
def regular_graphs():
    """Skeletons of the three regular tilings, large enough for test functions."""
    return {
        kind: build_skeleton(make_regular_tiling(kind, 1.0, "0,0,10,10"))
        for kind in ("square", "triangular", "hexagonal")
    }


def unit_edge(length=1.0):
    """Metric graph of one edge from (0, 0) to (length, 0)."""
    return MetricGraph.from_edges([[0.0, 0.0], [length, 0.0]], [[0, 1]])


@pytest.fixture
def single_edge():
    return unit_edge()
