"""Dataset statistics: daily segment counts, duration histograms, spatial grids."""

from __future__ import annotations

import bisect
import datetime as dt
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import BadEdges, DuplicateDay, EmptyDataset
from .segment_model import TrajectoryDataset, segment_sort_key

# Grid cells are computed in integer micro-degrees, the resolution of the SEG format.
_MICRO = 1_000_000


@dataclass(frozen=True)
class DailyCount:
    day: dt.date
    m1_count: int
    m3_count: int

    @property
    def gap_pct(self) -> float:
        """Relative m1 -> m3 segment shortfall, in percent of m1."""
        return 100.0 * (self.m1_count - self.m3_count) / self.m1_count if self.m1_count else 0.0


def daily_counts(
    datasets: Sequence[tuple[dt.date, TrajectoryDataset, TrajectoryDataset]],
) -> list[DailyCount]:
    days = [day for day, _, _ in datasets]
    if len(set(days)) != len(days):
        dupes = sorted({d for d in days if days.count(d) > 1})
        raise DuplicateDay(f"days given more than once: {', '.join(d.isoformat() for d in dupes)}")
    rows = [DailyCount(day, len(m1), len(m3)) for day, m1, m3 in datasets]
    return sorted(rows, key=lambda r: r.day)


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    underflow: int = 0
    overflow: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow


def log_edges(lo: float = 1.0, hi: float = 1e5, *, with_zero: bool = True) -> list[float]:
    """1-2-5 per decade edges for log-log display of durations.

    A leading 0 edge keeps zero-length segments inside the first bin.
    """
    edges: list[float] = [0.0] if with_zero else []
    decade = 1.0
    while decade <= hi:
        for mult in (1, 2, 5):
            value = decade * mult
            if lo <= value <= hi:
                edges.append(value)
        decade *= 10
    return edges


def duration_histogram(dataset: TrajectoryDataset, bin_edges: Sequence[float]) -> Histogram:
    edges = tuple(bin_edges)
    if len(edges) < 2:
        raise BadEdges(f"need at least 2 edges, got {len(edges)}")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise BadEdges("bin edges must be strictly increasing")
    counts = [0] * (len(edges) - 1)
    under = over = 0
    for seg in dataset.segments:
        d = seg.duration
        if d < edges[0]:
            under += 1
        elif d >= edges[-1]:
            over += 1
        else:
            counts[bisect.bisect_right(edges, d) - 1] += 1
    hist = Histogram(edges, tuple(counts), under, over)
    assert hist.total == len(dataset.segments)
    return hist


def quantile_below(dataset: TrajectoryDataset, threshold_s: float) -> float:
    """Fraction of segments whose duration is strictly below ``threshold_s``."""
    if not dataset.segments:
        raise EmptyDataset("cannot take a quantile of an empty dataset")
    below = sum(1 for seg in dataset.segments if seg.duration < threshold_s)
    return float(Fraction(below, len(dataset.segments)))


@dataclass(frozen=True)
class GridCell:
    total_duration_s: int
    segment_count: int

    @property
    def mean_duration_s(self) -> float:
        return self.total_duration_s / self.segment_count


@dataclass(frozen=True)
class SpatialGrid:
    cell_size_deg: float
    cells: dict[tuple[int, int], GridCell] = field(default_factory=dict)


def _to_micro(value: float) -> int:
    return round(value * _MICRO)


def cell_index(lat: float, lon: float, cell_size_deg: float) -> tuple[int, int]:
    cell = _to_micro(cell_size_deg)
    return _to_micro(lat) // cell, _to_micro(lon) // cell


def spatial_grid(dataset: TrajectoryDataset, cell_size_deg: float) -> SpatialGrid:
    """Mean segment duration per floor-aligned square of side ``cell_size_deg``.

    Segments are binned by their begin point. Cell sizes are quantised to
    1e-6 degrees, matching the coordinate resolution of SEG files, so that
    nested grids (1.0 over 0.1) tile exactly.
    """
    if not cell_size_deg > 0 or _to_micro(cell_size_deg) <= 0:
        raise ValueError(f"cell size must be a positive multiple of 1e-6 degrees, got {cell_size_deg}")
    sums: dict[tuple[int, int], list[int]] = {}
    for seg in sorted(dataset.segments, key=segment_sort_key):
        idx = cell_index(seg.lat_begin, seg.lon_begin, cell_size_deg)
        acc = sums.setdefault(idx, [0, 0])
        acc[0] += seg.duration
        acc[1] += 1
    cells = {idx: GridCell(total, count) for idx, (total, count) in sorted(sums.items())}
    return SpatialGrid(cell_size_deg, cells)


def coarsen(grid: SpatialGrid, factor: int) -> SpatialGrid:
    """Merge ``factor x factor`` blocks of cells into one."""
    merged: dict[tuple[int, int], list[int]] = {}
    for (i, j), cell in grid.cells.items():
        acc = merged.setdefault((i // factor, j // factor), [0, 0])
        acc[0] += cell.total_duration_s
        acc[1] += cell.segment_count
    return SpatialGrid(
        grid.cell_size_deg * factor,
        {idx: GridCell(total, count) for idx, (total, count) in sorted(merged.items())},
    )


def merge_histograms(hists: Sequence[Histogram]) -> Histogram:
    """Sum histograms that share the same edges."""
    if not hists:
        raise ValueError("nothing to merge")
    edges = hists[0].bin_edges
    if any(h.bin_edges != edges for h in hists):
        raise BadEdges("cannot merge histograms with different edges")
    counts = tuple(sum(col) for col in zip(*(h.counts for h in hists)))
    return Histogram(edges, counts, sum(h.underflow for h in hists), sum(h.overflow for h in hists))


def merge_grids(grids: Sequence[SpatialGrid]) -> SpatialGrid:
    if not grids:
        raise ValueError("nothing to merge")
    size = grids[0].cell_size_deg
    merged: dict[tuple[int, int], list[int]] = {}
    for grid in grids:
        if grid.cell_size_deg != size:
            raise ValueError("cannot merge grids with different cell sizes")
        for idx, cell in grid.cells.items():
            acc = merged.setdefault(idx, [0, 0])
            acc[0] += cell.total_duration_s
            acc[1] += cell.segment_count
    return SpatialGrid(size, {idx: GridCell(t, n) for idx, (t, n) in sorted(merged.items())})
