"""Exception hierarchy shared by all modules."""


class SharpLimitError(Exception):
    """Base class. `code` is a short machine-readable tag for the CLI."""

    code = "error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class InvalidArgumentError(SharpLimitError, ValueError):
    code = "invalid-argument"


class NumericalFailureError(SharpLimitError, ArithmeticError):
    code = "numerical-failure"


class GeometryError(SharpLimitError):
    code = "geometry"


class ConsistencyError(SharpLimitError):
    code = "consistency"


class SimulationHaltError(SharpLimitError):
    """Raised when a time integration has to stop. `state` holds the last good state."""

    code = "simulation-halt"

    def __init__(self, message, state=None, **context):
        super().__init__(message, **context)
        self.state = state


class DegenerateFitError(InvalidArgumentError):
    code = "degenerate-fit"


class OutputError(SharpLimitError, OSError):
    code = "io"
