"""Floquet multipliers of sampled linear periodic systems.

A d-step multistep discretization of ``x' = G(t) x`` turns the monodromy
eigenproblem into an eigenproblem for a product of ``p`` companion maps.
The product is handled either densely by a periodic Schur decomposition or
iteratively by a periodic Arnoldi method with a compressed basis.
"""

from .errors import (
    BreakdownError,
    ConfigError,
    DegenerateStencil,
    FloquetError,
    IllPosedStep,
    IndexViolation,
    InvalidArgument,
    IterationLimit,
    ManifestError,
    OrbitNotFound,
    ReorderFailure,
)
from .escale import ExponentScaledValue
from .floquet import (
    FloquetSolution,
    eig_error,
    gap_report,
    solve,
    subspace_angle,
    vec_error,
)
from .grid import PeriodicGrid, build_pattern, build_uniform, from_times, h_factor
from .lptv import CompanionOperator, ImplicitSample, SampledLptvSystem, assemble
from .multistep import MultistepScheme, scheme
from .pschur import PeriodicSchurForm, periodic_schur, product_eigvals
from .ptoar import solve_dominant

__version__ = "0.1.0"

__all__ = [
    "BreakdownError", "CompanionOperator", "ConfigError", "DegenerateStencil",
    "ExponentScaledValue", "FloquetError", "FloquetSolution", "IllPosedStep",
    "ImplicitSample", "IndexViolation", "InvalidArgument", "IterationLimit",
    "ManifestError", "MultistepScheme", "OrbitNotFound", "PeriodicGrid",
    "PeriodicSchurForm", "ReorderFailure", "SampledLptvSystem", "assemble",
    "build_pattern", "build_uniform", "eig_error", "from_times", "gap_report",
    "h_factor", "periodic_schur", "product_eigvals", "scheme", "solve",
    "solve_dominant", "subspace_angle", "vec_error",
]
