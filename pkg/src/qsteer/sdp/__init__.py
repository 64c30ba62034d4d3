"""Self-contained semidefinite programming engine."""
from .embed import embed_hermitian, extract_hermitian, hvec, unhvec
from .ipm import IpmOptions
from .kernels import BACKEND
from .model import (ConicProblem, Expr, MalformedProblem, Problem, RedundantRowsWarning, Solution,
                    embed_complex, esum, linear_map_matrix)

__all__ = [
    "BACKEND", "ConicProblem", "Expr", "IpmOptions", "MalformedProblem", "Problem", "RedundantRowsWarning",
    "Solution", "embed_complex", "embed_hermitian", "esum", "extract_hermitian", "hvec", "linear_map_matrix",
    "unhvec",
]
