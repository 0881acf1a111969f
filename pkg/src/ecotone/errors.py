"""Exception hierarchy.

Two families matter to callers: :class:`ConfigError` for anything the caller
got wrong (bad shapes, out-of-range parameters, unknown keys) and
:class:`NumericalError` for solver failures on otherwise valid input.  The CLI
maps them to exit codes 2 and 3.
"""


class ConfigError(ValueError):
    """Invalid input or configuration."""


class ShapeError(ConfigError):
    """A nodal field does not match its grid."""


class DomainError(ConfigError):
    """An argument lies outside the domain where an operation is defined."""


class NumericalError(RuntimeError):
    """A numerical procedure failed on valid input."""


class EvaluationError(NumericalError):
    """A user-supplied nonlinearity returned a non-finite value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ConvergenceError(NumericalError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class BlowUpError(NumericalError):
    """A time step produced a non-finite or runaway field."""

    def __init__(self, message, t=None, node=None, record=None):
        super().__init__(message)
        self.t = t
        self.node = node
        self.record = record


class PerturbativeFailure(NumericalError):
    """A small-parameter equilibrium construction left its valid regime."""
