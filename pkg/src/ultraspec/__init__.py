"""Spectra of hierarchical Laplacians and their point, ball and block perturbations."""

__version__ = "0.1.0"

from .errors import (ConsistencyError, ConvergenceError, DivergenceError,  # noqa: E402
                     EigenvalueHitError, PoleProximityError, RangeError, UltraspecError,
                     ValidationError)
from .model_core import BallRef, HierModel, Kind, PAdicPoint  # noqa: E402

__all__ = [
    "__version__", "HierModel", "Kind", "PAdicPoint", "BallRef", "UltraspecError",
    "ValidationError", "RangeError", "DivergenceError", "PoleProximityError",
    "EigenvalueHitError", "ConsistencyError", "ConvergenceError",
]
