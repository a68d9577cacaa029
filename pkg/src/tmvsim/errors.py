"""Exception hierarchy.

Every error raised by the package derives from :class:`TMVSError`.  Argument
errors additionally derive from :class:`ValueError` so that callers that only
care about "bad input" can catch the builtin.
"""


class TMVSError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(TMVSError, ValueError):
    pass


class InvalidIndexError(TMVSError, IndexError):
    pass


class InvalidArgumentError(TMVSError, ValueError):
    pass


class NoSqueezeSolutionError(TMVSError, ValueError):
    """A coupling ratio is outside the arctanh domain (|ratio| >= 1)."""


class InconsistentDrivesError(TMVSError, ValueError):
    """The two squeeze constraints disagree beyond tolerance."""


class InvalidHamiltonianError(TMVSError, ValueError):
    pass


class NumericalIntegrityError(TMVSError, ArithmeticError):
    """A density-matrix invariant (trace, Hermiticity, positivity) was breached."""


class StiffnessError(NumericalIntegrityError):
    """The adaptive integrator could not make progress.

    Attributes
    ----------
    t : float
        Simulation time at which the step size underflowed.
    """

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class NonUniqueSteadyStateError(NumericalIntegrityError):
    def __init__(self, message, null_dim):
        super().__init__(message)
        self.null_dim = null_dim


class FitFailureError(TMVSError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(TMVSError, ValueError):
    """Configuration validation failed.

    ``problems`` lists every violated field, not only the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
