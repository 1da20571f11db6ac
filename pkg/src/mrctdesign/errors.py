"""Exception hierarchy shared by every module of the package."""


class MRCTError(Exception):
    """Base class for all errors raised by :mod:`mrctdesign`."""


class DomainError(MRCTError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class InfeasibleDesignError(DomainError):
    """No finite sample size attains the requested power.

    Raised when the between-region variability is so large that the
    precision of the pooled estimate saturates below the target.
    """

    def __init__(self, message, ratio=None, limit=None):
        super().__init__(message)
        self.ratio = ratio
        self.limit = limit


class NotAvailableError(DomainError):
    """A closed-form result is not defined for the given inputs."""


class NumericalError(MRCTError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""


class BracketError(NumericalError):
    """The supplied interval does not bracket a root."""


class ConvergenceError(NumericalError):
    """An iterative estimator did not converge (e.g. monotone likelihood)."""


class CalibrationError(DomainError):
    """A survival model cannot be tuned to the requested RMST difference.

    Attributes
    ----------
    achievable : tuple of float
        Interval of RMST differences reachable over the parameter bracket.
    """

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class EstimationError(DomainError):
    """Data are too degenerate to produce a usable estimate."""
