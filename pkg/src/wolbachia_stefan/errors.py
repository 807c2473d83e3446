"""Exception hierarchy shared by the solvers and the command-line front end."""


class WolbachiaError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(WolbachiaError, ValueError):
    """A configuration or argument failed validation.

    ``field`` names the offending entry so the CLI can report it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(WolbachiaError, ValueError):
    """The request is outside the regime where the quantity is defined."""


class BracketError(WolbachiaError, ValueError):
    """A root-finding bracket does not straddle a sign change."""


class ResolutionError(WolbachiaError, ValueError):
    """The grid is too coarse for the requested accuracy."""


class HorizonError(WolbachiaError, RuntimeError):
    """A simulation probe could not be classified within its horizon."""


class NumericalFailure(WolbachiaError, RuntimeError):
    """A time step or iterative solve broke down.

    ``step`` carries the step index when the failure happened inside a
    time integration.
    """

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class TruncationError(NumericalFailure):
    """The free boundary reached the end of the truncated domain."""


class ConvergenceError(NumericalFailure):
    """An iterative solver ran out of iterations."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message}; residual={residual:.3e}"
        super().__init__(message)
