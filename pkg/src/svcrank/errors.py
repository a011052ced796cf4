"""Exception hierarchy shared by the ranking, simulation and I/O layers."""

from __future__ import annotations


class SvcRankError(Exception):
    """Base class for every error raised by this package."""


# ranking


class RankingError(SvcRankError, ValueError):
    pass


class EmptyUniverseError(RankingError):
    pass


class InsufficientOverlapError(RankingError):
    pass


class NoServicesError(RankingError):
    pass


class InvalidContextError(RankingError):
    pass


# simulation


class SimulationError(SvcRankError):
    pass


class UnschedulableJobError(SimulationError):
    def __init__(self, job_id: str, demand: int):
        super().__init__(f"job {job_id!r} demands {demand} units, more than any sub-cloud offers")
        self.job_id = job_id
        self.demand = demand


class NotRunningError(SimulationError):
    pass


class UnknownSubCloudError(SimulationError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown sub-cloud"


class CapacityExceededError(SimulationError):
    pass


class InvariantViolation(SvcRankError, AssertionError):
    """An internal consistency check failed; indicates a bug, not bad input."""


# data files and parameters


class DataError(SvcRankError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(DataError):
    pass


class DuplicateObservationError(DataError):
    pass


class InvalidValueError(DataError):
    pass


class InvalidParameterError(SvcRankError, ValueError):
    pass
