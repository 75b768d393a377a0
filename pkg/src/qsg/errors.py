"""Exception hierarchy shared by the solver modules and the CLI."""


class QsgError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class InvalidInstanceError(QsgError, ValueError):
    exit_code = 3


class ParseError(InvalidInstanceError):
    exit_code = 3


class InvalidIndexError(QsgError, IndexError):
    exit_code = 3


class EmptyStrategyError(QsgError, ValueError):
    exit_code = 3


class DomainError(QsgError, ValueError):
    exit_code = 3


class DegenerateTransformError(DomainError):
    """Raised when lambda * w^a_j == 0, so the y-transform is constant."""


class SizeError(QsgError, ValueError):
    exit_code = 4


class SolverConfigError(QsgError):
    exit_code = 5


class InfeasibleError(QsgError):
    exit_code = 6


class SolverTimeoutError(QsgError):
    exit_code = 7

    def __init__(self, message, log=""):
        super().__init__(message)
        self.log = log


class SolverOutputError(QsgError):
    exit_code = 8
