"""
Exception hierarchy for tensorheston.

All library errors derive from HestonError so callers (the scenario runner and
the CLI) can separate model failures from programming errors.
"""

from typing import Any, Dict, Optional


class HestonError(Exception):
    """Base class for all tensorheston errors."""


class ConfigurationError(HestonError):
    """Invalid scenario or configuration value."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        self.message = message
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DimensionError(ConfigurationError):
    """Vector or matrix shapes do not agree."""


class NumericalError(HestonError):
    """A numerical routine produced an unusable result."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NotPSDError(NumericalError):
    """Operator is not symmetric positive semidefinite within tolerance."""


class StabilityError(NumericalError):
    """Generator spectrum is not in the open left half-plane."""


class DomainError(HestonError, ValueError):
    """Argument outside its mathematical domain."""


class PreconditionError(HestonError, ValueError):
    """Operation precondition violated (non-unit vector, non-eigenvector, ...)."""


class UnsupportedConfigurationError(HestonError):
    """Requested closed form is not available for this model."""


class MaturityRangeError(DomainError):
    """Maturity beyond the represented horizon of the curve space."""
