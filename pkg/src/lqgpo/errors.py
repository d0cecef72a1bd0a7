"""Exception types shared across the package.

Input-shaped problems (bad dimensions, malformed data, unidentifiable fits)
derive from ValueError; numerical failures (axis poles, solver breakdown,
instabilities) derive from ArithmeticError so callers can map them to
distinct exit codes.
"""


class DimensionError(ValueError):
    """Matrix dimensions are inconsistent with the requested operation."""


class IdentifiabilityError(ValueError):
    """A least-squares fit is rank deficient; carries condition diagnostics."""

    def __init__(self, message, condition=None, rank=None, unknowns=None):
        super().__init__(message)
        self.condition = condition
        self.rank = rank
        self.unknowns = unknowns


class AxisPoleError(ArithmeticError):
    """An eigenvalue sits within the split tolerance of the imaginary axis."""


class SolverError(ArithmeticError):
    """A matrix-equation solver failed or could not certify its residual."""


class UnstableError(ArithmeticError):
    """An operation required a stable system (or stabilizing controller)."""
