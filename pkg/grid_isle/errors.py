"""Exception types raised across the package.

Each error carries the process exit code the CLI reports for it.
"""
from typing import Optional


class GridIsleError(Exception):
    """Base class for all errors raised by grid_isle."""

    exit_code: int = 1


class ConfigError(GridIsleError, ValueError):
    """Invalid user configuration or input document."""

    exit_code = 2


class CaseSchemaError(ConfigError):
    """A case document violates the schema; `path` points at the offending field."""

    def __init__(self, path: str, message: str):
        """Create the error for the field at `path`."""
        super().__init__(f"{path}: {message}")
        self.path = path


class SimulationError(GridIsleError, RuntimeError):
    """The simulated state diverged."""

    def __init__(self, t: float, message: str):
        """Create the error for simulation time `t`."""
        super().__init__(f"t={t:.4f}s: {message}")
        self.t = t


class DetectionError(GridIsleError, ValueError):
    """Feature extraction, training or voting failed."""


class ConvergenceError(DetectionError):
    """SMO did not reach the KKT tolerance within its iteration cap."""

    def __init__(self, iterations: int, violation: float):
        """Create the error after `iterations` SMO steps."""
        super().__init__(
            f"SMO did not converge after {iterations} iterations "
            f"(max KKT violation {violation:.3e})"
        )
        self.iterations = iterations


class InfeasibleError(GridIsleError):
    """The islanding MILP has no feasible assignment."""

    exit_code = 3

    def __init__(self, family: Optional[str], message: str):
        """Create the error naming the violated constraint family."""
        super().__init__(message)
        self.family = family


class DispatchInfeasibleError(GridIsleError):
    """An island cannot be dispatched within its generator and line limits."""

    exit_code = 3


class CriticalityError(DispatchInfeasibleError):
    """Critical demand of an island exceeds its generation capacity."""


class StageError(GridIsleError):
    """Wraps an error raised inside a pipeline stage."""

    def __init__(self, stage: str, t: Optional[float], cause: BaseException):
        """Create the error for `stage` at simulation time `t`."""
        where = f" at t={t:.4f}s" if t is not None else ""
        super().__init__(f"stage '{stage}' failed{where}: {cause}")
        self.stage = stage
        self.t = t
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


class SolverTimeoutError(GridIsleError):
    """Branch and bound stopped at a limit before proving optimality.

    Raised when no incumbent was found, and by the CLI after writing the results
    when the best incumbent was reported with a nonzero gap.
    """

    exit_code = 4
