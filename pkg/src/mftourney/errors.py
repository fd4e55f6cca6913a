"""Exception types shared by the solvers and the command line."""

from __future__ import annotations

__all__ = ["ConvergenceError", "NotRealizableError", "ConfigError"]


class ConvergenceError(RuntimeError):
    """A root finder or fixed-point loop stopped without meeting its tolerance.

    Attributes
    ----------
    residual : float or array
        Last residual seen, for diagnostics.
    """

    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


class NotRealizableError(ValueError):
    """A target distribution is not the equilibrium of any admissible reward."""


class ConfigError(ValueError):
    """Invalid user configuration (bad schema, missing file, bad value)."""
