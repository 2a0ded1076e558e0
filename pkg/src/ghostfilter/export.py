"""CSV/JSON renderings of the analysis series.

Every writer returns text with LF line endings and a fixed column order so
that outputs are byte-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

from .conflict import ConflictPair
from .ghost_filter import SweepPoint, ThresholdEstimate
from .stats import DailyCount, Histogram, SpatialGrid


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def daily_counts_csv(rows: Iterable[DailyCount]) -> str:
    return _csv(("day", "m1", "m3"), ((r.day.isoformat(), r.m1_count, r.m3_count) for r in rows))


def histogram_csv(hist: Histogram) -> str:
    edges = hist.bin_edges
    rows = [("-inf", _num(edges[0]), hist.underflow)]
    rows += [(_num(lo), _num(hi), n) for lo, hi, n in zip(edges, edges[1:], hist.counts)]
    rows.append((_num(edges[-1]), "inf", hist.overflow))
    return _csv(("edge_lo", "edge_hi", "count"), rows)


def grid_csv(grid: SpatialGrid) -> str:
    rows = (
        (i, j, repr(cell.mean_duration_s), cell.segment_count)
        for (i, j), cell in sorted(grid.cells.items())
    )
    return _csv(("lat_idx", "lon_idx", "mean_s", "count"), rows)


def conflicts_csv(pairs: Iterable[ConflictPair]) -> str:
    rows = (
        (p.point_id, p.fl, p.crossing_a.flight_id, p.crossing_b.flight_id, p.crossing_a.t, p.crossing_b.t, p.separation_s)
        for p in pairs
    )
    return _csv(("point_id", "fl", "flight_a", "flight_b", "t_a", "t_b", "separation_s"), rows)


def cumulative_csv(series: Iterable[tuple[int, int]]) -> str:
    return _csv(("sep_s", "count"), series)


def sweep_csv(points: Iterable[SweepPoint]) -> str:
    rows = (
        (p.threshold_s, p.kept_segments, p.n_los, "" if p.density is None else repr(p.density))
        for p in points
    )
    return _csv(("threshold_s", "kept_segments", "n_los", "density"), rows)


def estimate_json(estimate: ThresholdEstimate) -> str:
    payload = {
        "delta_t_s": estimate.delta_t_s,
        "method": estimate.method.name,
        "epsilon": estimate.epsilon,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
