"""Core trajectory types and the segment-to-crossing normalisation.

Times are integer seconds since 00:00:00 UTC of the dataset day. Flight levels
are integers in hundreds of feet.
"""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, NamedTuple

from .errors import DuplicateSegment, OverlappingSegments


class Phase(str, Enum):
    CLIMB = "CLIMB"
    ENROUTE = "ENROUTE"
    DESCENT = "DESCENT"


class Kind(str, Enum):
    M1 = "M1"  # last filed flight plan
    M3 = "M3"  # plan corrected by radar where it deviated too much


@dataclass(frozen=True, slots=True)
class Segment:
    """One trajectory leg between two significant points."""

    flight_id: str
    origin: str
    destination: str
    aircraft_type: str
    begin_point_id: str
    end_point_id: str
    t_begin: int
    t_end: int
    lat_begin: float
    lon_begin: float
    fl_begin: int
    lat_end: float
    lon_end: float
    fl_end: int
    phase: Phase
    distance: float

    def __post_init__(self) -> None:
        problem = segment_problem(self)
        if problem is not None:
            column, message = problem
            raise ValueError(f"{column}: {message}")

    @property
    def duration(self) -> int:
        return self.t_end - self.t_begin


def segment_problem(seg: Segment) -> tuple[str, str] | None:
    """Return ``(column, message)`` for the first violated invariant, else None."""
    for name in ("flight_id", "origin", "destination", "aircraft_type", "begin_point_id", "end_point_id"):
        value = getattr(seg, name)
        if "," in value or "\n" in value or value != value.strip():
            return name, f"illegal characters in {value!r}"
    if not seg.flight_id:
        return "flight_id", "empty flight id"
    if not seg.begin_point_id:
        return "begin_point_id", "empty point id"
    if not seg.end_point_id:
        return "end_point_id", "empty point id"
    if seg.t_begin < 0:
        return "t_begin", f"negative time {seg.t_begin}"
    if seg.t_end < seg.t_begin:
        return "t_end", f"t_end {seg.t_end} precedes t_begin {seg.t_begin}"
    for name in ("lat_begin", "lat_end"):
        value = getattr(seg, name)
        if not -90.0 <= value <= 90.0:
            return name, f"latitude {value} outside [-90, 90]"
    for name in ("lon_begin", "lon_end"):
        value = getattr(seg, name)
        if not -180.0 <= value < 180.0:
            return name, f"longitude {value} outside [-180, 180)"
    if seg.fl_begin < 0:
        return "fl_begin", f"negative flight level {seg.fl_begin}"
    if seg.fl_end < 0:
        return "fl_end", f"negative flight level {seg.fl_end}"
    if not seg.distance >= 0.0:
        return "distance", f"negative distance {seg.distance}"
    if not isinstance(seg.phase, Phase):
        return "phase", f"unknown phase {seg.phase!r}"
    return None


def segment_sort_key(seg: Segment) -> tuple:
    """Canonical segment order: by flight, then time."""
    return (seg.flight_id, seg.t_begin, seg.t_end, seg.begin_point_id, seg.end_point_id)


@dataclass(frozen=True)
class TrajectoryDataset:
    """All segments of one m1 or m3 file for one day.

    Construction validates the dataset-level invariants: no duplicate
    ``(flight_id, begin_point_id, t_begin)`` rows and no time overlap between
    segments of the same flight.
    """

    kind: Kind
    day: dt.date
    segments: tuple[Segment, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "segments", tuple(self.segments))
        _validate_segments(self.segments, self.kind)

    def __len__(self) -> int:
        return len(self.segments)

    def with_segments(self, segments: Iterable[Segment]) -> TrajectoryDataset:
        return replace(self, segments=tuple(segments))

    def flight_ids(self) -> set[str]:
        return {seg.flight_id for seg in self.segments}


def _validate_segments(segments: tuple[Segment, ...], kind: Kind) -> None:
    seen: set[tuple[str, str, int]] = set()
    by_flight: dict[str, list[Segment]] = defaultdict(list)
    for seg in segments:
        key = (seg.flight_id, seg.begin_point_id, seg.t_begin)
        if key in seen:
            raise DuplicateSegment(
                f"duplicate {kind.value} segment: flight {seg.flight_id} "
                f"at {seg.begin_point_id} t={seg.t_begin}"
            )
        seen.add(key)
        by_flight[seg.flight_id].append(seg)
    for flight_id, legs in by_flight.items():
        legs.sort(key=lambda s: (s.t_begin, s.t_end))
        for prev, cur in zip(legs, legs[1:]):
            if cur.t_begin < prev.t_end:
                raise OverlappingSegments(
                    f"flight {flight_id}: segment starting at t={cur.t_begin} "
                    f"overlaps segment ending at t={prev.t_end}"
                )


class Crossing(NamedTuple):
    """One flight passing one significant point."""

    flight_id: str
    point_id: str
    t: int
    fl: int
    phase: Phase


def crossing_sort_key(c: Crossing) -> tuple:
    return (c.point_id, c.fl, c.t, c.flight_id)


def derive_crossings(dataset: TrajectoryDataset) -> list[Crossing]:
    """Turn segment endpoints into point-passage events.

    Endpoints sharing ``(flight_id, point_id, t)`` collapse to one crossing.
    A segment's begin endpoint wins over another segment's end endpoint, so a
    crossing shared by consecutive legs takes the outbound leg's FL and phase.
    Remaining ties go to the later segment in canonical order.
    """
    best: dict[tuple[str, str, int], tuple[tuple[int, int], Crossing]] = {}
    ordered = sorted(dataset.segments, key=segment_sort_key)
    for rank, seg in enumerate(ordered):
        endpoints = (
            (0, seg.end_point_id, seg.t_end, seg.fl_end),
            (1, seg.begin_point_id, seg.t_begin, seg.fl_begin),
        )
        for is_begin, point_id, t, fl in endpoints:
            key = (seg.flight_id, point_id, t)
            priority = (is_begin, rank)
            current = best.get(key)
            if current is None or priority > current[0]:
                best[key] = (priority, Crossing(seg.flight_id, point_id, t, fl, seg.phase))
    return sorted((c for _, c in best.values()), key=crossing_sort_key)
