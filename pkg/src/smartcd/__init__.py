"""Smoothed, accelerated, randomized block coordinate descent for
``min_x f(x) + g(x) + h(Ax)``."""

from ._backend import BACKEND
from .blocks import BlockPartition, BlockSparseMatrix, block_norm, make_partition, weighted_norm_sq
from .functions import ConjugateProxPart, SeparablePart, SmoothPart
from .problems import ProblemSpec, degenerate_lp, svm_dual, tv_l1_least_squares
from .solver import SolverConfig, SolverDiverged, Trace, run

__all__ = [
    "BACKEND",
    "BlockPartition",
    "BlockSparseMatrix",
    "ConjugateProxPart",
    "ProblemSpec",
    "SeparablePart",
    "SmoothPart",
    "SolverConfig",
    "SolverDiverged",
    "Trace",
    "block_norm",
    "degenerate_lp",
    "make_partition",
    "run",
    "svm_dual",
    "tv_l1_least_squares",
    "weighted_norm_sq",
]

__version__ = "0.1.0"
