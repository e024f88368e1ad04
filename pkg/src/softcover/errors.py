"""Exception types shared across the toolkit.

Each error carries the process exit code the command line tool maps it to:
2 for validation problems, 3 for exact-enumeration capacity limits, 4 for
numerical non-convergence.
"""


class SoftcoverError(Exception):
    exit_code = 1


class ValidationError(SoftcoverError):
    """Malformed inputs: bad masses, dimension mismatches, bad parameters."""

    exit_code = 2


class CapacityError(SoftcoverError):
    """A request would exceed the flat product-alphabet enumeration cap."""

    exit_code = 3


class ConvergenceError(SoftcoverError):
    """An iterative solver exhausted its iteration budget with a large residual."""

    exit_code = 4

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class UndefinedPosteriorError(ValidationError):
    """A source symbol with positive mass has zero synthesized mass, so the
    posterior over codewords is undefined there."""


class DistortionInfeasibleError(ValidationError):
    """A requested distortion level cannot be met by the supplied pair."""
