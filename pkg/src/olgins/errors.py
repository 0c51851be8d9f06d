"""Exception hierarchy.

Validation problems derive from :class:`InvalidParameters`; everything that
goes wrong inside a numerical routine derives from :class:`NumericalError`.
The CLI maps the two families to distinct exit codes.
"""


class OlginsError(Exception):
    """Base class for all package errors."""


class InvalidParameters(OlginsError, ValueError):
    """Parameters violate a type invariant or a maintained assumption."""


class AssumptionViolation(InvalidParameters):
    """A model assumption required by the requested operation fails."""


class InfeasibleTarget(InvalidParameters):
    """The requested initial promise cannot be delivered."""


class NumericalError(OlginsError, RuntimeError):
    """A numerical routine failed."""


class NoNontrivialBound(NumericalError):
    """The promise-bound fixed point only has the autarkic root."""


class AutarkyOnly(NumericalError):
    """The deterministic economy admits no nonautarkic stationary allocation."""


class ConvergenceError(NumericalError):
    """An iteration did not converge.

    Parameters
    ----------
    message : str
        Human readable description.
    history : list of float, optional
        Residual history up to the failure.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class DomainError(NumericalError, ValueError):
    """A function was queried outside its domain."""


class ShootDiverged(NumericalError):
    """Bisection on the initial multiplier failed to bracket the saddle path."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
