"""Semantic exception hierarchy.

Public functions raise these instead of bare ``ValueError``/``RuntimeError``
wherever the failure is a property of the computation (non-convergence,
rejection-cap overrun, unusable configuration) rather than of the caller's
argument types.
"""

from __future__ import annotations


class TailriskError(Exception):
    """Base class for every error raised by this package."""


class ConvergenceError(TailriskError):
    """An iterative solve hit its iteration cap without meeting tolerance.

    Carries the best bracket (or iterate) found so callers can diagnose or
    restart.
    """

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message)
        self.bracket = bracket


class SamplingError(TailriskError):
    """A rejection-sampling loop exceeded its attempt cap."""


class InsufficientSamplesError(SamplingError):
    """A conditional estimate is degenerate (no accepted mass in the data)."""


class ConfigError(TailriskError):
    """A pool configuration document is malformed or inconsistent."""
