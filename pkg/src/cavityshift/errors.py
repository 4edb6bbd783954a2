"""Exception types shared across the package."""

from __future__ import annotations


class CavityShiftError(Exception):
    """Base class for every package-specific error."""


class DomainError(CavityShiftError, ValueError):
    """An argument lies outside the physical domain of an operation."""


class InputError(CavityShiftError, ValueError):
    """Structurally invalid input: bad plan, malformed curve, grid mismatch."""


class ConfigError(InputError):
    """Invalid value or unknown key in a run configuration."""


class SolverError(CavityShiftError, RuntimeError):
    """Root finding failed to converge.  Carries the final bracket state."""

    def __init__(self, message: str, *, lo: float | None = None,
                 hi: float | None = None, f_lo: float | None = None,
                 f_hi: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.f_lo = f_lo
        self.f_hi = f_hi
        self.iterations = iterations


class FitError(CavityShiftError, RuntimeError):
    """Nonlinear fit did not converge.  Carries iteration diagnostics."""

    def __init__(self, message: str, *, iterations: int | None = None,
                 residual_norm: float | None = None,
                 params: tuple | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm
        self.params = params


class CalibrationError(CavityShiftError, RuntimeError):
    """Noise calibration could not reach its target.  Carries the bracket."""

    def __init__(self, message: str, *, bracket: tuple | None = None,
                 achieved: float | None = None, target: float | None = None):
        super().__init__(message)
        self.bracket = bracket
        self.achieved = achieved
        self.target = target
