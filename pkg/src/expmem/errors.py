"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ExpMemError(Exception):
    """Base class for all errors raised by expmem."""


class InvalidInput(ExpMemError, ValueError):
    """A precondition on an argument was violated."""


class NoFeasibleGrasp(ExpMemError):
    """Every grasp hypothesis was rejected by the reachability predicate.

    Callers treat this as a signal to replan (e.g. clear an obstruction first).
    """


class BackendError(ExpMemError):
    """A remote model endpoint answered with a non-success status."""

    def __init__(self, message: str, status: int | None = None, body: str = "") -> None:
        super().__init__(message)
        self.status = status
        self.body = body[:500]


class BackendUnavailable(BackendError):
    """The endpoint could not be reached within the retry budget."""

    def __init__(self, message: str, attempts: int, last_error: str = "") -> None:
        super().__init__(message)
        self.attempts = attempts
        self.last_error = last_error


class ProtocolViolation(ExpMemError):
    """A model response did not conform to the function-calling contract."""


class StoreParseError(ExpMemError, ValueError):
    """A persisted memory store could not be parsed."""

    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason
