"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "TwoscaleError",
    "ConfigurationError",
    "DimensionError",
    "DivergenceError",
    "ManifoldError",
]


class TwoscaleError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(TwoscaleError, ValueError):
    """Invalid parameter, config key, or ill-posed problem setup."""


class DimensionError(TwoscaleError, ValueError):
    """Array argument has the wrong shape."""


class DivergenceError(TwoscaleError, RuntimeError):
    """A trajectory left the finite-float range.

    Carries the step index and time at which the first non-finite
    entry appeared.
    """

    def __init__(self, step: int, time: float, message: str | None = None):
        self.step = step
        self.time = time
        if message is None:
            message = f"non-finite state at step {step} (t={time:.6g})"
        super().__init__(message)


class ManifoldError(TwoscaleError, ValueError):
    """Input violates a rotation-frame constraint beyond tolerance."""
