"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: usage errors exit 1, numerical failures
exit 2, and violations of the stochastic-stability bound exit 3.
"""


class ShadowlabError(Exception):
    """Base class for all library errors."""


class UsageError(ShadowlabError, ValueError):
    """Bad arguments, violated preconditions, malformed input files."""


class NumericalError(ShadowlabError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""


class NonConvergenceError(NumericalError):
    """An iteration ran out of steps. Carries the last iterate and residual."""

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class ExperimentError(NumericalError):
    """An experiment's internal certificate failed.

    ``artifacts`` maps a name to the partial result table, for dumping.
    """

    def __init__(self, message, artifacts=None):
        super().__init__(message)
        self.artifacts = dict(artifacts or {})


class BoundViolation(ShadowlabError):
    """A measured gap exceeded the stochastic-stability bound."""
