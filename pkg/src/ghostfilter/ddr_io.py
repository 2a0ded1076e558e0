"""SEG file reader/writer and the m1/m3 crossing join.

SEG layout (UTF-8, LF line endings)::

    SEGv1,day=2011-06-01,kind=M3
    flight_id,origin,destination,aircraft_type,begin_point_id,end_point_id,t_begin,t_end,lat_begin,lon_begin,fl_begin,lat_end,lon_end,fl_end,phase,distance

Lines starting with ``#`` are comments; they are skipped on read and never
written. Blank lines are skipped on read.
"""

from __future__ import annotations

import datetime as dt
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

from .errors import DayMismatch, InvalidHeader, MalformedRow
from .segment_model import (
    Crossing,
    Kind,
    Phase,
    Segment,
    TrajectoryDataset,
    derive_crossings,
    segment_problem,
    segment_sort_key,
)

COLUMNS = (
    "flight_id",
    "origin",
    "destination",
    "aircraft_type",
    "begin_point_id",
    "end_point_id",
    "t_begin",
    "t_end",
    "lat_begin",
    "lon_begin",
    "fl_begin",
    "lat_end",
    "lon_end",
    "fl_end",
    "phase",
    "distance",
)
_INT_COLUMNS = {"t_begin", "t_end", "fl_begin", "fl_end"}
_FLOAT_COLUMNS = {"lat_begin", "lon_begin", "lat_end", "lon_end", "distance"}
_HEADER_RE = re.compile(r"SEGv1,day=(\d{4}-\d{2}-\d{2}),kind=(M1|M3)")


def _parse_row(fields: list[str], lineno: int) -> Segment:
    if len(fields) != len(COLUMNS):
        raise MalformedRow(lineno, "*", f"expected {len(COLUMNS)} columns, got {len(fields)}")
    values: dict[str, object] = {}
    for name, raw in zip(COLUMNS, fields):
        if raw != raw.strip() or (raw == "" and name not in ("origin", "destination", "aircraft_type")):
            raise MalformedRow(lineno, name, f"bad value {raw!r}")
        if name in _INT_COLUMNS:
            try:
                values[name] = int(raw)
            except ValueError:
                raise MalformedRow(lineno, name, f"not an integer: {raw!r}") from None
        elif name in _FLOAT_COLUMNS:
            try:
                value = float(raw)
            except ValueError:
                raise MalformedRow(lineno, name, f"not a number: {raw!r}") from None
            if value != value or value in (float("inf"), float("-inf")):
                raise MalformedRow(lineno, name, f"not finite: {raw!r}")
            values[name] = value
        elif name == "phase":
            try:
                values[name] = Phase(raw)
            except ValueError:
                raise MalformedRow(lineno, name, f"unknown phase {raw!r}") from None
        else:
            values[name] = raw
    try:
        return Segment(**values)
    except ValueError:
        # __post_init__ rejected it; report the offending column precisely
        seg = object.__new__(Segment)
        for name, value in values.items():
            object.__setattr__(seg, name, value)
        column, message = segment_problem(seg)
        raise MalformedRow(lineno, column, message) from None


def parse_segment_file(data: bytes | str) -> TrajectoryDataset:
    """Parse SEG text into a validated dataset, preserving row order."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    header: re.Match[str] | None = None
    segments: list[Segment] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = _HEADER_RE.fullmatch(line)
            if header is None:
                raise InvalidHeader(f"line {lineno}: expected 'SEGv1,day=YYYY-MM-DD,kind=M1|M3', got {line!r}")
            try:
                day = dt.date.fromisoformat(header.group(1))
            except ValueError:
                raise InvalidHeader(f"line {lineno}: invalid date {header.group(1)!r}") from None
            continue
        segments.append(_parse_row(line.split(","), lineno))
    if header is None:
        raise InvalidHeader("missing SEGv1 header line")
    return TrajectoryDataset(Kind(header.group(2)), day, tuple(segments))


def format_header(dataset: TrajectoryDataset) -> str:
    return f"SEGv1,day={dataset.day.isoformat()},kind={dataset.kind.value}"


def format_row(seg: Segment) -> str:
    return (
        f"{seg.flight_id},{seg.origin},{seg.destination},{seg.aircraft_type},"
        f"{seg.begin_point_id},{seg.end_point_id},{seg.t_begin:d},{seg.t_end:d},"
        f"{seg.lat_begin:.6f},{seg.lon_begin:.6f},{seg.fl_begin:d},"
        f"{seg.lat_end:.6f},{seg.lon_end:.6f},{seg.fl_end:d},"
        f"{seg.phase.value},{seg.distance:.2f}"
    )


def write_segment_file(dataset: TrajectoryDataset) -> bytes:
    """Serialize to canonical SEG: rows sorted by flight then time."""
    lines = [format_header(dataset)]
    lines.extend(format_row(seg) for seg in sorted(dataset.segments, key=segment_sort_key))
    return ("\n".join(lines) + "\n").encode("utf-8")


def canonicalize(data: bytes | str) -> bytes:
    return write_segment_file(parse_segment_file(data))


def read_segment_path(path: str | Path) -> TrajectoryDataset:
    return parse_segment_file(Path(path).read_bytes())


def write_segment_path(dataset: TrajectoryDataset, path: str | Path) -> None:
    Path(path).write_bytes(write_segment_file(dataset))


@dataclass(frozen=True)
class MatchReport:
    matched: list[tuple[Crossing, Crossing]]
    m3_only: list[Crossing]
    m1_only: list[Crossing]
    m3_only_pct: float
    m3_only_segment_pct: float  # same ratio over raw segment rows, for reference

    @property
    def m3_crossing_count(self) -> int:
        return len(self.matched) + len(self.m3_only)

    @property
    def m1_crossing_count(self) -> int:
        return len(self.matched) + len(self.m1_only)


def _group_by_key(crossings: list[Crossing]) -> dict[tuple[str, str], list[Crossing]]:
    groups: dict[tuple[str, str], list[Crossing]] = defaultdict(list)
    for c in crossings:
        groups[(c.flight_id, c.point_id)].append(c)
    for group in groups.values():
        group.sort(key=lambda c: c.t)
    return groups


def match_datasets(m1: TrajectoryDataset, m3: TrajectoryDataset) -> MatchReport:
    """Join m1 and m3 crossings on ``(flight_id, point_id)``.

    Repeated passages of the same point pair up in ascending time order; any
    surplus on either side stays unmatched.
    """
    if m1.day != m3.day:
        raise DayMismatch(f"m1 covers {m1.day.isoformat()} but m3 covers {m3.day.isoformat()}")
    m1_groups = _group_by_key(derive_crossings(m1))
    m3_groups = _group_by_key(derive_crossings(m3))

    matched: list[tuple[Crossing, Crossing]] = []
    m3_only: list[Crossing] = []
    m1_only: list[Crossing] = []
    for key in sorted(m1_groups.keys() | m3_groups.keys()):
        planned = m1_groups.get(key, [])
        flown = m3_groups.get(key, [])
        n = min(len(planned), len(flown))
        matched.extend(zip(planned[:n], flown[:n]))
        m1_only.extend(planned[n:])
        m3_only.extend(flown[n:])

    m3_total = len(matched) + len(m3_only)
    pct = 100.0 * len(m3_only) / m3_total if m3_total else 0.0
    return MatchReport(matched, m3_only, m1_only, pct, _segment_only_pct(m1, m3))


def _segment_only_pct(m1: TrajectoryDataset, m3: TrajectoryDataset) -> float:
    def key(seg: Segment) -> tuple[str, str, str]:
        return (seg.flight_id, seg.begin_point_id, seg.end_point_id)

    available = Counter(key(seg) for seg in m1.segments)
    unmatched = 0
    for seg in m3.segments:
        k = key(seg)
        if available[k] > 0:
            available[k] -= 1
        else:
            unmatched += 1
    return 100.0 * unmatched / len(m3.segments) if m3.segments else 0.0
