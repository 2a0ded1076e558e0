"""Ghost-flight detection by sweeping a time-deviation threshold.

A segment of the executed (m3) data is trusted only when its time at the
begin point differs from the filed plan (m1) by strictly more than the
candidate threshold; radar-only crossings with no plan counterpart are always
trusted. Sweeping the threshold and tracking conflict density
``n_los / s**2`` exposes the provider's hidden update threshold as the point
where the density collapses.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .conflict import ConflictPair, ConflictParams, cumulative_by_separation, detect_conflicts
from .ddr_io import match_datasets
from .errors import EmptyFiltered, InconsistentDeviations, NoTransition
from .segment_model import Crossing, Phase, TrajectoryDataset, crossing_sort_key, derive_crossings, segment_sort_key

log = logging.getLogger(__name__)

UNMATCHED = math.inf  # deviation assigned to m3 crossings absent from m1
DEFAULT_SWEEP_STEP_S = 100


class Granularity(str, Enum):
    SEGMENT = "segment"
    FLIGHT = "flight"


class Denominator(str, Enum):
    SEGMENTS = "segments"
    FLIGHTS = "flights"


class Estimator(str, Enum):
    FIRST_BELOW_EPSILON = "first-below-eps"
    LARGEST_RELATIVE_DROP = "largest-drop"


@dataclass(frozen=True)
class DeviationRecord:
    flight_id: str
    point_id: str
    t_m1: int | None
    t_m3: int
    deviation_s: float

    @property
    def m3_only(self) -> bool:
        return self.t_m1 is None


@dataclass(frozen=True)
class SweepPoint:
    threshold_s: int
    kept_segments: int
    n_los: int
    density: float | None  # None when nothing survives the filter
    kept_flights: int = 0


@dataclass(frozen=True)
class ThresholdEstimate:
    delta_t_s: int
    method: Estimator
    epsilon: float
    sweep: list[SweepPoint] = field(default_factory=list)


def compute_deviations(m1: TrajectoryDataset, m3: TrajectoryDataset) -> list[DeviationRecord]:
    """One record per m3 crossing: matched ones carry ``|T_m1 - T_m3|``,
    m3-only ones carry an infinite deviation."""
    report = match_datasets(m1, m3)
    records = [
        DeviationRecord(c3.flight_id, c3.point_id, c1.t, c3.t, abs(c1.t - c3.t)) for c1, c3 in report.matched
    ]
    records.extend(DeviationRecord(c.flight_id, c.point_id, None, c.t, UNMATCHED) for c in report.m3_only)
    records.sort(key=lambda r: (r.flight_id, r.t_m3, r.point_id))
    return records


def _keep_keys(
    segments: Sequence, deviations: Sequence[DeviationRecord], granularity: Granularity
) -> list[float]:
    """Per segment, the deviation that must exceed the threshold for it to be kept."""
    by_crossing = {(r.flight_id, r.point_id, r.t_m3): r.deviation_s for r in deviations}
    keys = []
    for seg in segments:
        dev = by_crossing.get((seg.flight_id, seg.begin_point_id, seg.t_begin))
        if dev is None:
            raise InconsistentDeviations(
                f"no deviation record for flight {seg.flight_id} at {seg.begin_point_id} t={seg.t_begin}"
            )
        keys.append(dev)
    if Granularity(granularity) is Granularity.FLIGHT:
        flight_max: dict[str, float] = defaultdict(lambda: -math.inf)
        for r in deviations:
            flight_max[r.flight_id] = max(flight_max[r.flight_id], r.deviation_s)
        keys = [flight_max[seg.flight_id] for seg in segments]
    return keys


def filter_at(
    m3: TrajectoryDataset,
    deviations: Sequence[DeviationRecord],
    threshold_s: float,
    granularity: Granularity = Granularity.SEGMENT,
) -> TrajectoryDataset:
    """Keep the m3 segments whose deviation is strictly greater than ``threshold_s``.

    In flight mode a flight is kept whole unless every one of its deviations
    is at or below the threshold.
    """
    keys = _keep_keys(m3.segments, deviations, granularity)
    return m3.with_segments(seg for seg, key in zip(m3.segments, keys) if key > threshold_s)


def _sweep_point(threshold_s, kept_segments, kept_flights, n_los, denominator) -> SweepPoint:
    s = kept_flights if Denominator(denominator) is Denominator.FLIGHTS else kept_segments
    density = n_los / (s * s) if s > 0 else None
    return SweepPoint(threshold_s, kept_segments, n_los, density, kept_flights)


def kept_crossings(m3: TrajectoryDataset, kept: TrajectoryDataset) -> list[Crossing]:
    """Crossings of the filtered dataset ``kept``, with FL and phase as in ``m3``.

    A point shared by an inbound and an outbound leg carries the outbound
    leg's attributes. Re-deriving them from ``kept`` alone would fall back to
    the inbound leg once the outbound one is filtered out, which can create
    conflicts that were absent at a lower threshold. Pinning attributes to
    the unfiltered data keeps the conflict count monotone in the threshold.
    """
    reference = {(c.flight_id, c.point_id, c.t): c for c in derive_crossings(m3)}
    keys = {(s.flight_id, s.begin_point_id, s.t_begin) for s in kept.segments}
    keys.update((s.flight_id, s.end_point_id, s.t_end) for s in kept.segments)
    return sorted((reference[k] for k in keys), key=crossing_sort_key)


def density_at(
    m3: TrajectoryDataset,
    deviations: Sequence[DeviationRecord],
    threshold_s: float,
    params: ConflictParams = ConflictParams(),
    granularity: Granularity = Granularity.SEGMENT,
    denominator: Denominator = Denominator.SEGMENTS,
) -> SweepPoint:
    """Filter, re-detect conflicts, and report ``D = n_los / s**2``."""
    kept = filter_at(m3, deviations, threshold_s, granularity)
    if not kept.segments:
        raise EmptyFiltered(f"no segments survive threshold {threshold_s} s")
    n_los = len(detect_conflicts(kept_crossings(m3, kept), params))
    return _sweep_point(threshold_s, len(kept.segments), len(kept.flight_ids()), n_los, denominator)


class SweepIndex:
    """Columnar view of one (m3, deviations) pair for fast repeated evaluation.

    Crossings and their attributes are derived once from the unfiltered m3.
    Each crossing survives a threshold while any segment ending or starting
    there is kept, so it carries the largest keep key of those segments.
    Conflicts are then counted with a sorted window search instead of
    materialising pair objects.
    """

    def __init__(
        self,
        m3: TrajectoryDataset,
        deviations: Sequence[DeviationRecord],
        params: ConflictParams = ConflictParams(),
        granularity: Granularity = Granularity.SEGMENT,
    ):
        self.params = params
        segs = sorted(m3.segments, key=segment_sort_key)
        keys = np.array(_keep_keys(segs, deviations, granularity), dtype=np.float64)
        n = len(segs)
        self._n_segments = n
        self._sorted_keys = np.sort(keys)

        flight_codes = {f: i for i, f in enumerate(sorted({s.flight_id for s in segs}))}
        seg_flight = np.array([flight_codes[s.flight_id] for s in segs], dtype=np.int64)
        flight_key = np.full(len(flight_codes), -np.inf)
        np.maximum.at(flight_key, seg_flight, keys)
        self._sorted_flight_keys = np.sort(flight_key)

        point_codes = {
            p: i for i, p in enumerate(sorted({s.begin_point_id for s in segs} | {s.end_point_id for s in segs}))
        }
        phase_codes = {ph: i for i, ph in enumerate(Phase)}
        rank = np.arange(n, dtype=np.int64)
        seg_index = np.concatenate([rank, rank])
        flight = np.concatenate([seg_flight, seg_flight])
        point = np.array(
            [point_codes[s.begin_point_id] for s in segs] + [point_codes[s.end_point_id] for s in segs],
            dtype=np.int64,
        )
        t = np.array([s.t_begin for s in segs] + [s.t_end for s in segs], dtype=np.int64)
        fl = np.array([s.fl_begin for s in segs] + [s.fl_end for s in segs], dtype=np.int64)
        phase = np.array([phase_codes[s.phase] for s in segs] * 2, dtype=np.int64)
        is_begin = np.concatenate([np.ones(n, dtype=np.int64), np.zeros(n, dtype=np.int64)])

        # preferred endpoint first within each (flight, point, t) group, as in derive_crossings
        order = np.lexsort((-seg_index, -is_begin, t, point, flight))
        flight, point, t, fl, phase = flight[order], point[order], t[order], fl[order], phase[order]
        key = keys[seg_index[order]]
        first = np.ones(len(order), dtype=bool)
        first[1:] = (flight[1:] != flight[:-1]) | (point[1:] != point[:-1]) | (t[1:] != t[:-1])
        starts = np.flatnonzero(first)
        alive = np.maximum.reduceat(key, starts) if len(starts) else key[:0]
        flight, point, t, fl, phase = flight[starts], point[starts], t[starts], fl[starts], phase[starts]

        eligible = (fl >= params.min_fl) & (phase == phase_codes[params.required_phase])
        flight, point, t, fl, alive = flight[eligible], point[eligible], t[eligible], fl[eligible], alive[eligible]
        if len(t):
            _, bucket = np.unique(point * (int(fl.max()) + 1) + fl, return_inverse=True)
            bucket = bucket.astype(np.int64).reshape(-1)
            order = np.lexsort((t, bucket))
            t0, span = int(t.min()), int(t.max()) - int(t.min()) + params.max_separation_s + 1
            self._pos = bucket[order] * span + (t[order] - t0)
            self._flight = flight[order]
            self._alive = alive[order]
        else:
            self._pos = self._flight = np.zeros(0, dtype=np.int64)
            self._alive = np.zeros(0, dtype=np.float64)

    def kept_counts(self, threshold_s: float) -> tuple[int, int]:
        kept_segments = self._n_segments - int(np.searchsorted(self._sorted_keys, threshold_s, side="right"))
        kept_flights = len(self._sorted_flight_keys) - int(
            np.searchsorted(self._sorted_flight_keys, threshold_s, side="right")
        )
        return kept_segments, kept_flights

    def n_los(self, threshold_s: float) -> int:
        idx = np.flatnonzero(self._alive > threshold_s)
        if len(idx) < 2:
            return 0
        pos, flight = self._pos[idx], self._flight[idx]
        hi = np.searchsorted(pos, pos + self.params.max_separation_s, side="left")
        ar = np.arange(len(pos))
        partners = hi - ar - 1
        total = int(partners.sum())
        if total == 0:
            return 0
        left = np.repeat(ar, partners)
        offset = np.arange(total) - np.repeat(np.cumsum(partners) - partners, partners)
        right = left + 1 + offset
        same_flight = int(np.count_nonzero(flight[left] == flight[right]))
        return total - same_flight

    def point(self, threshold_s: int, denominator: Denominator = Denominator.SEGMENTS) -> SweepPoint:
        kept_segments, kept_flights = self.kept_counts(threshold_s)
        n_los = self.n_los(threshold_s) if kept_segments else 0
        return _sweep_point(threshold_s, kept_segments, kept_flights, n_los, denominator)


def default_thresholds(
    deviations: Sequence[DeviationRecord], step_s: int = DEFAULT_SWEEP_STEP_S, max_s: int | None = None
) -> list[int]:
    """0 to ``max_s`` (default: twice the largest finite deviation) in steps of ``step_s``."""
    if step_s <= 0:
        raise ValueError(f"sweep step must be positive, got {step_s}")
    if max_s is None:
        finite = [r.deviation_s for r in deviations if math.isfinite(r.deviation_s)]
        max_s = 2 * int(max(finite, default=0))
    return list(range(0, max_s + 1, step_s))


def sweep(
    m1: TrajectoryDataset,
    m3: TrajectoryDataset,
    thresholds: Sequence[int],
    params: ConflictParams = ConflictParams(),
    granularity: Granularity = Granularity.SEGMENT,
    denominator: Denominator = Denominator.SEGMENTS,
    jobs: int = 1,
    deviations: Sequence[DeviationRecord] | None = None,
) -> list[SweepPoint]:
    """Conflict density at each threshold, in threshold order.

    Thresholds that empty the dataset yield points with ``density=None``.
    """
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("thresholds must be non-empty")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly ascending")
    if deviations is None:
        deviations = compute_deviations(m1, m3)
    index = SweepIndex(m3, deviations, params, granularity)
    log.info("sweeping %d thresholds over %d m3 segments", len(thresholds), len(m3.segments))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda thr: index.point(thr, denominator), thresholds))
    return [index.point(thr, denominator) for thr in thresholds]


def estimate_threshold(
    sweep_points: Sequence[SweepPoint],
    method: Estimator = Estimator.FIRST_BELOW_EPSILON,
    epsilon: float = 0.0,
) -> ThresholdEstimate:
    """Locate the density collapse in a sweep.

    ``FIRST_BELOW_EPSILON`` picks the smallest threshold whose density is at
    most ``epsilon``, provided the sweep starts above it.
    ``LARGEST_RELATIVE_DROP`` picks the threshold right after the step with
    the largest ``(D_i - D_{i+1}) / max(D_i, epsilon)``. Ties go to the
    smaller threshold. Points with undefined density are ignored.
    """
    method = Estimator(method)
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    points = [p for p in sweep_points if p.density is not None]
    if len(points) < 2:
        raise NoTransition(f"need at least 2 sweep points with defined density, got {len(points)}")
    densities = [p.density for p in points]
    if all(d == densities[0] for d in densities):
        raise NoTransition(f"density is constant ({densities[0]!r}) across the sweep")

    if method is Estimator.FIRST_BELOW_EPSILON:
        if densities[0] <= epsilon:
            raise NoTransition(f"density already <= {epsilon} at the first threshold {points[0].threshold_s}")
        for p in points:
            if p.density <= epsilon:
                return ThresholdEstimate(p.threshold_s, method, epsilon, list(sweep_points))
        raise NoTransition(f"density never drops to <= {epsilon}")

    best_drop, best_at = 0.0, None
    for prev, cur in zip(points, points[1:]):
        scale = max(prev.density, epsilon)
        drop = (prev.density - cur.density) / scale if scale > 0 else 0.0
        if drop > best_drop:
            best_drop, best_at = drop, cur.threshold_s
    if best_at is None:
        raise NoTransition("density never decreases across the sweep")
    return ThresholdEstimate(best_at, method, epsilon, list(sweep_points))


def filtered_conflict_report(
    m1: TrajectoryDataset,
    m3: TrajectoryDataset,
    threshold_s: float,
    params: ConflictParams = ConflictParams(),
    granularity: Granularity = Granularity.SEGMENT,
    deviations: Sequence[DeviationRecord] | None = None,
) -> tuple[list[ConflictPair], list[tuple[int, int]]]:
    """Conflicts and their cumulative-by-separation curve after ghost removal."""
    if deviations is None:
        deviations = compute_deviations(m1, m3)
    kept = filter_at(m3, deviations, threshold_s, granularity)
    pairs = detect_conflicts(kept_crossings(m3, kept), params)
    return pairs, cumulative_by_separation(pairs, params.max_separation_s)
