"""Mapping between names used in run configurations and classes"""

from tileheat.geometry import HexagonalTiling, SquareTiling, TriangularTiling
from tileheat.semigroup import CrankNicolson, KrylovExpm

kind_mapping = {
    "square": SquareTiling,
    "triangular": TriangularTiling,
    "hexagonal": HexagonalTiling,
}

scheme_mapping = {"cn": CrankNicolson, "krylov": KrylovExpm}
