"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation 2, solver 3, integration 4.
"""

from __future__ import annotations


class AgevirError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(AgevirError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class ValidationError(AgevirError, ValueError):
    """Scenario or kernel specification is malformed or inconsistent."""

    exit_code = 2


class SolverError(AgevirError, RuntimeError):
    """Root bracketing or equilibrium construction failed."""

    exit_code = 3


class IntegrationError(AgevirError, RuntimeError):
    """Time integration produced NaN or a negative state beyond roundoff."""

    exit_code = 4
