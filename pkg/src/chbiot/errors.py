"""Exception hierarchy shared by all subpackages."""


class ConfigurationError(ValueError):
    """Invalid grid, parameter or run configuration."""


class ConfigParseError(ConfigurationError):
    """Raised by the config parser; carries the offending line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ContractError(ValueError):
    """Arguments violate an operation's preconditions (e.g. mismatched grids)."""


class OutOfDomainError(ValueError):
    """A coordinate or probe point lies outside the computational domain."""


class DiagnosticError(RuntimeError):
    """An interface diagnostic could not be evaluated."""


class SolverError(RuntimeError):
    """Base class for linear and nonlinear solver failures."""


class LinearSolverError(SolverError):
    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class NewtonConvergenceError(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NewtonDivergenceError(NewtonConvergenceError):
    pass


class StepFailure(SolverError):
    """A time step could not be completed; ``log`` holds the Newton reports so far."""

    def __init__(self, message, log=None, cause=None):
        super().__init__(message)
        self.log = list(log or [])
        self.cause = cause
