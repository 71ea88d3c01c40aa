"""Exception types shared across the package.

The command line front end maps these onto process exit codes, so library
code should raise the most specific type that applies rather than a bare
ValueError or RuntimeError.
"""


class ValidationError(ValueError):
    """Inputs outside the admissible parameter ranges."""


class InvariantViolation(RuntimeError):
    """A mathematical invariant that should hold numerically failed."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its target tolerance."""
