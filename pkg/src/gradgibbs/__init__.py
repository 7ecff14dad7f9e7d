"""Numerical laboratory for the two-well gradient Gibbs model on the torus."""

__version__ = "0.1.0"

from .errors import InvalidCouplingError, NotPositiveDefiniteError, NumericalError, ValidationError
from .torus import CouplingConfig, GradientConfig, HeightField, ModelParams, PatternId, build_torus

__all__ = [
    "CouplingConfig",
    "GradientConfig",
    "HeightField",
    "InvalidCouplingError",
    "ModelParams",
    "NotPositiveDefiniteError",
    "NumericalError",
    "PatternId",
    "ValidationError",
    "build_torus",
]
