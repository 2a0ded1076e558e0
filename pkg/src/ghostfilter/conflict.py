"""Loss-of-separation detection at shared significant points.

Two crossings conflict when different aircraft pass the same point at the same
flight level less than ``max_separation_s`` apart, both at or above
``min_fl`` and both in ``required_phase``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .segment_model import Crossing, Phase

DEFAULT_MAX_SEPARATION_S = 120
DEFAULT_MIN_FL = 200


@dataclass(frozen=True)
class ConflictParams:
    max_separation_s: int = DEFAULT_MAX_SEPARATION_S
    min_fl: int = DEFAULT_MIN_FL
    required_phase: Phase = Phase.ENROUTE

    def __post_init__(self) -> None:
        if self.max_separation_s <= 0:
            raise ValueError(f"max_separation_s must be positive, got {self.max_separation_s}")
        if self.min_fl < 0:
            raise ValueError(f"min_fl must be non-negative, got {self.min_fl}")
        object.__setattr__(self, "required_phase", Phase(self.required_phase))

    def eligible(self, c: Crossing) -> bool:
        return c.fl >= self.min_fl and c.phase == self.required_phase


@dataclass(frozen=True)
class ConflictPair:
    crossing_a: Crossing
    crossing_b: Crossing
    separation_s: int

    @classmethod
    def of(cls, x: Crossing, y: Crossing) -> ConflictPair:
        a, b = (x, y) if (x.flight_id, x.t) <= (y.flight_id, y.t) else (y, x)
        return cls(a, b, abs(a.t - b.t))

    @property
    def point_id(self) -> str:
        return self.crossing_a.point_id

    @property
    def fl(self) -> int:
        return self.crossing_a.fl

    def sort_key(self) -> tuple:
        a, b = self.crossing_a, self.crossing_b
        return (a.point_id, a.fl, self.separation_s, a.flight_id, b.flight_id, a.t, b.t)


def detect_conflicts(crossings: Iterable[Crossing], params: ConflictParams = ConflictParams()) -> list[ConflictPair]:
    """Bucket by ``(point_id, fl)``, sort each bucket by time, scan a window.

    Cost is O(n log n + pairs), plus same-flight revisits inside a window.
    """
    buckets: dict[tuple[str, int], list[Crossing]] = defaultdict(list)
    min_fl = params.min_fl
    phase = params.required_phase
    for c in crossings:
        if c.fl >= min_fl and c.phase == phase:
            buckets[(c.point_id, c.fl)].append(c)

    window = params.max_separation_s
    pairs: list[ConflictPair] = []
    for bucket in buckets.values():
        if len(bucket) < 2:
            continue
        bucket.sort(key=lambda c: (c.t, c.flight_id))
        n = len(bucket)
        for i in range(n - 1):
            ci = bucket[i]
            limit = ci.t + window
            j = i + 1
            while j < n and bucket[j].t < limit:
                cj = bucket[j]
                if cj.flight_id != ci.flight_id:
                    pairs.append(ConflictPair.of(ci, cj))
                j += 1
    pairs.sort(key=ConflictPair.sort_key)
    return pairs


def detect_conflicts_bruteforce(
    crossings: Sequence[Crossing], params: ConflictParams = ConflictParams()
) -> list[ConflictPair]:
    """Literal O(n^2) check of every unordered pair; the reference for tests."""
    crossings = list(crossings)
    pairs = []
    for i in range(len(crossings)):
        for j in range(i + 1, len(crossings)):
            a, b = crossings[i], crossings[j]
            if (
                a.point_id == b.point_id
                and a.fl == b.fl
                and a.flight_id != b.flight_id
                and abs(a.t - b.t) < params.max_separation_s
                and a.fl >= params.min_fl
                and b.fl >= params.min_fl
                and a.phase == params.required_phase
                and b.phase == params.required_phase
            ):
                pairs.append(ConflictPair.of(a, b))
    pairs.sort(key=ConflictPair.sort_key)
    return pairs


def cumulative_by_separation(pairs: Iterable[ConflictPair], max_separation_s: int) -> list[tuple[int, int]]:
    """``(s, #pairs with separation <= s)`` for every integer s in [0, max]."""
    hits = [0] * (max_separation_s + 1)
    for pair in pairs:
        if pair.separation_s <= max_separation_s:
            hits[pair.separation_s] += 1
    series = []
    running = 0
    for s, n in enumerate(hits):
        running += n
        series.append((s, running))
    return series
