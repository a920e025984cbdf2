"""Numerical laboratory for capture into autoresonance under combined parametric and external chirped excitation."""

__version__ = "0.1.0"

from .errors import (AutoresError, BudgetError, ConfigError, DomainError, PreconditionError,
                     SingularityError)
from .model import ClosedFormMu, DuffingParams, ModelParams, ModelState, SeriesMu

__all__ = [
    "__version__", "AutoresError", "BudgetError", "ConfigError", "DomainError",
    "PreconditionError", "SingularityError", "ClosedFormMu", "DuffingParams", "ModelParams",
    "ModelState", "SeriesMu",
]
