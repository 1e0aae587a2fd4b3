"""Typed errors raised across the package."""
from __future__ import annotations


class LensgamesError(Exception):
    """Base class for all library errors."""


class BackendMismatch(LensgamesError, TypeError):
    """Finite and Gaussian values were mixed in one operation."""


class DimensionMismatch(LensgamesError, ValueError):
    """Supports, domains or shapes do not line up."""


class InvalidState(LensgamesError, ValueError):
    """A state violates its invariants (normalisation, PSD-ness, ...)."""


class InvalidChannel(LensgamesError, ValueError):
    """A channel violates its invariants (row sums, shapes, ...)."""


class UnsupportedOutcome(LensgamesError, ValueError):
    """Conditioning on an outcome of (numerically) zero mass."""


class SupportViolation(LensgamesError, ValueError):
    """Divergence requested where the support condition fails."""


class UnknownFactor(LensgamesError, ValueError):
    """Marginalisation onto a factor that was never declared."""


class EmptyStrategySpace(LensgamesError, ValueError):
    """A game was built with no strategies."""


class SchemaError(LensgamesError, ValueError):
    """A configuration file does not match the expected schema."""


class DivergedError(LensgamesError, RuntimeError):
    """A realisation's objective blew up; carries the partial trajectory."""

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory
