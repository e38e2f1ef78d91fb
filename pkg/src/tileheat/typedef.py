"""Definitions of used types"""

from typing import Any, Dict, List, Optional, TypedDict

Point = List[float]
VertexLoop = List[Point]

SCHEMA_VERSION = 1


class TilingDict(TypedDict, total=False):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for the tiling document."""
    schema_version: int
    name: str
    kind: str
    side: Optional[float]
    window: List[float]
    tiling_id: str
    polygons: List[VertexLoop]


class ConstantsDict(TypedDict, total=False):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for the tiling constants."""
    h: float
    H: float
    M: float
    l_min: float
    d_max: Optional[int]


class VertexDict(TypedDict):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for one vertex of the graph document."""
    id: int
    x: float
    y: float
    boundary: bool


class EdgeDict(TypedDict):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for one edge of the graph document."""
    id: int
    u: int
    v: int
    length: float


class GraphDict(TypedDict, total=False):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for the graph document.

    faces holds per polygon the list of its sides, every side a list of
    [edge id, forward] pairs in counterclockwise order."""
    schema_version: int
    tiling_id: str
    vertices: List[VertexDict]
    edges: List[EdgeDict]
    faces: List[List[List[List[Any]]]]
    constants: ConstantsDict
    tiling: TilingDict


class CheckRecordDict(TypedDict):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for one inequality check."""
    name: str
    lhs: float
    rhs: float
    ratio: Optional[float]
    status: str
    passed: bool
    metadata: Dict[str, Any]


class TransitionRowDict(TypedDict):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for one row of the transition table."""
    dilation: float
    beta2: float
    t_star: float
    ratio: float
    recomputed_t_star: float


class ReportDict(TypedDict, total=False):
    # pylint: disable=inherit-non-class, too-few-public-methods
    """Type declaration for the bounds report."""
    schema_version: int
    generated_at: str
    tiling_id: str
    constants: ConstantsDict
    beta1: float
    beta2: float
    beta2_sharp: float
    gamma1: float
    gamma2: float
    t_star: float
    observed_crossover: Optional[float]
    eta_fit: Optional[float]
    kernel_norm_method: str
    transition: List[TransitionRowDict]
    records: List[CheckRecordDict]
    passed: bool
    config: Dict[str, Any]
