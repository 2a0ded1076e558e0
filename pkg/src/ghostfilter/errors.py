"""Exception hierarchy.

Every data-level failure derives from :class:`GhostFilterError`; the CLI maps
those to exit code 2.
"""

from __future__ import annotations


class GhostFilterError(Exception):
    """Base class for all data errors raised by the package."""


class InvalidDataset(GhostFilterError):
    """A dataset violates one of its structural invariants."""


class DuplicateSegment(InvalidDataset):
    pass


class OverlappingSegments(InvalidDataset):
    pass


class InvalidHeader(GhostFilterError):
    pass


class MalformedRow(GhostFilterError):
    """A SEG data row failed to parse or validate."""

    def __init__(self, line: int, column: str, message: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class DayMismatch(GhostFilterError):
    pass


class DuplicateDay(GhostFilterError):
    pass


class BadEdges(GhostFilterError):
    pass


class EmptyDataset(GhostFilterError):
    pass


class InconsistentDeviations(GhostFilterError):
    pass


class EmptyFiltered(GhostFilterError):
    pass


class NoTransition(GhostFilterError):
    pass


class InfeasibleConfig(GhostFilterError):
    pass
