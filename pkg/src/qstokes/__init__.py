"""Monodromy data of semisimple Frobenius manifolds.

The package computes twisted reflection vectors, Stokes matrices and
central connection matrices for quantum cohomology (projective spaces
built in) and checks them against the exceptional-collection arithmetic
on the K-theory side.
"""

__version__ = "0.1.0"

from .numerics import (
    Jet,
    LogBranchPoint,
    complex_gamma,
    rgamma,
    operator_power,
    calibrated_period,
    continue_linear_ode,
)
from .frobenius import (
    FrobeniusModel,
    ModelValidationError,
    SemisimpleData,
    qh_projective_space,
    save_model,
    load_model,
    canonical_data,
    calibration_series,
    rmatrix_series,
)
from .paths import (
    Direction,
    PathPlan,
    DistinguishedSystem,
    critical_directions,
    lexicographic_order,
    reference_system,
    simple_loop,
    braid_move,
    eta_sequences,
)

__all__ = [
    "__version__",
    "Jet",
    "LogBranchPoint",
    "complex_gamma",
    "rgamma",
    "operator_power",
    "calibrated_period",
    "continue_linear_ode",
    "FrobeniusModel",
    "ModelValidationError",
    "SemisimpleData",
    "qh_projective_space",
    "save_model",
    "load_model",
    "canonical_data",
    "calibration_series",
    "rmatrix_series",
    "Direction",
    "PathPlan",
    "DistinguishedSystem",
    "critical_directions",
    "lexicographic_order",
    "reference_system",
    "simple_loop",
    "braid_move",
    "eta_sequences",
]
