"""Typed exceptions raised by qprecision.

All library errors derive from QPrecisionError so callers can catch broadly;
the CLI maps subfamilies onto exit codes.
"""

from __future__ import annotations


class QPrecisionError(Exception):
    """Base class for all qprecision errors."""


class DimError(QPrecisionError):
    """Shape or dimension mismatch."""


class HermiticityError(QPrecisionError):
    """Input violates a Hermiticity requirement."""


class ConvergenceError(QPrecisionError):
    """An iterative or library solver failed to converge or verify."""


class KrausError(QPrecisionError):
    """A Kraus set violates completeness or labeling requirements."""


class SupportError(QPrecisionError):
    """A ratio references probability outside the available support."""


class NonUniqueStationaryError(QPrecisionError):
    """Fixed point of the channel is not unique at the required gap."""

    def __init__(self, message: str, gap: float | None = None):
        super().__init__(message)
        self.gap = gap


class DegeneracyError(QPrecisionError):
    """A spectrum required to be nondegenerate has (near-)equal levels."""


class ResonanceError(QPrecisionError):
    """A coupling violates the resonance or pairing rules."""


class EnumerationCapError(QPrecisionError):
    """Exhaustive enumeration would exceed the configured cap."""


class ConsistencyError(QPrecisionError):
    """An internal cross-check failed (normalization, sign, identity)."""


class BoundViolationError(QPrecisionError):
    """A proven inequality came out violated beyond numerical slack."""


class DomainError(QPrecisionError):
    """Scalar argument outside the mathematical domain of a function."""


class SingularError(QPrecisionError):
    """A matrix that must be invertible is numerically singular."""


class ModeError(QPrecisionError):
    """Operation invoked in a mode its preconditions exclude."""


class AccuracyError(QPrecisionError):
    """A stepping budget or accuracy check was violated."""


class ConfigError(QPrecisionError):
    """Invalid experiment configuration or input file."""
