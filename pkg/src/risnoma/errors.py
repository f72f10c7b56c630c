"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class InfeasibleScenario(RuntimeError):
    """No feasible point exists (or could be found) for the requested scenario.

    ``last_delta`` carries the last infeasibility indicator when the failure
    comes from the feasibility search.
    """

    def __init__(self, message, last_delta=None):
        super().__init__(message)
        self.last_delta = last_delta


class NeedsInitialization(RuntimeError):
    """The SCA subproblem was infeasible for the supplied fixed points."""


class DegenerateChannel(RuntimeError):
    pass


class SolverFailure(RuntimeError):
    def __init__(self, message, report=None, trace=None):
        super().__init__(message)
        self.report = report
        self.trace = trace


class ConfigError(ValueError):
    """Schema violation in a scenario file; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
