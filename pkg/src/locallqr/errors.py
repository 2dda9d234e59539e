"""Exception types raised across the package."""


class Infeasible(Exception):
    """A localized problem (or a set of columns) has no feasible point.

    ``columns`` lists the failing disturbance columns (0-based) and
    ``residuals`` the attained minimal residual of each.
    """

    def __init__(self, message, columns=(), residuals=()):
        super().__init__(message)
        self.columns = list(columns)
        self.residuals = list(residuals)


class SingularKKT(Exception):
    """The KKT matrix stayed singular after dropping dependent constraints."""


class NoConvergence(Exception):
    """Riccati fixed-point iteration did not converge to a stabilizing solution."""


class SimulationDiverged(Exception):
    """State magnitude crossed the overflow guard during simulation."""

    def __init__(self, message, step, trace=None):
        super().__init__(message)
        self.step = step
        self.trace = trace
