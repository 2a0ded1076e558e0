"""Paired m1/m3 datasets with planted ground truth.

The executed file is built the way the provider is assumed to build it:

* genuine flights deviated by at least 1.1x the update threshold, so m3
  carries their radar-corrected times (plan shifted by the deviation);
* ghost flights deviated by less than the threshold; their m3 times are the
  plan shifted by that small deviation;
* rerouted flights fly an entirely different set of points in m3, so all of
  their m3 crossings are m3-only;
* cancelled flights appear in m1 only.

False conflicts are injected between pairs of ghost flights with adjacent
deviations. The top pair is pinned just below the threshold, which places the
density collapse exactly at the threshold. Every other combination of m3
endpoints is kept at least ``CLEARANCE_S`` apart at any shared
``(point, flight level)``, so no conflict arises by accident under any
filtering.

Randomness comes only from :meth:`random.Random.random`, whose sequence is
stable across Python versions and platforms.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import random
from dataclasses import dataclass, field

from .conflict import DEFAULT_MAX_SEPARATION_S, DEFAULT_MIN_FL
from .errors import InfeasibleConfig
from .segment_model import Kind, Phase, Segment, TrajectoryDataset, segment_sort_key

CLEARANCE_S = 2 * DEFAULT_MAX_SEPARATION_S
DAY_S = 86_400
_MAX_ATTEMPTS = 200

AIRPORTS = (
    "EDDF", "EDDM", "EGLL", "EGKK", "EHAM", "LFPG", "LFPO", "LEMD", "LEBL", "LIRF",
    "LIMC", "LSZH", "LOWW", "EBBR", "EKCH", "ESSA", "ENGM", "EIDW", "LPPT", "LGAV",
)
AIRCRAFT_TYPES = ("A320", "A319", "A321", "B738", "B737", "E190", "CRJ9", "DH8D", "A333", "B77W")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    n_flights: int = 5000
    segments_per_flight: tuple[int, int] = (4, 10)  # inclusive
    true_threshold_s: int = 2000
    ghost_fraction: float = 0.3  # of flights present in both files
    reroute_fraction: float = 0.05  # of flights present in m3
    cancel_fraction: float = 0.05  # of all flights
    duration_quantile: tuple[int, float] = (120, 0.80)
    conflict_injection_rate: float = 0.2  # injected pairs per ghost flight, at most 0.5
    bbox: tuple[float, float, float, float] = (35.0, 60.0, -10.0, 30.0)  # lat_min, lat_max, lon_min, lon_max
    day: dt.date = dt.date(2011, 6, 1)
    n_points: int | None = None  # default: max(500, 2 * n_flights)
    low_level_fraction: float = 0.1  # flights cruising below FL200
    min_duration_s: int = 5
    max_duration_s: int = 3600

    def __post_init__(self) -> None:
        for name in ("ghost_fraction", "reroute_fraction", "cancel_fraction", "low_level_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InfeasibleConfig(f"{name} must lie in [0, 1], got {value}")
        if self.n_flights < 1:
            raise InfeasibleConfig(f"n_flights must be >= 1, got {self.n_flights}")
        lo, hi = self.segments_per_flight
        if lo < 3 or hi < lo:
            raise InfeasibleConfig(f"segments_per_flight must satisfy 3 <= lo <= hi, got {self.segments_per_flight}")
        if self.true_threshold_s < 1:
            raise InfeasibleConfig(f"true_threshold_s must be >= 1, got {self.true_threshold_s}")
        if self.conflict_injection_rate < 0:
            raise InfeasibleConfig(f"conflict_injection_rate must be >= 0, got {self.conflict_injection_rate}")
        q_threshold, q_fraction = self.duration_quantile
        if not 0.0 <= q_fraction <= 1.0:
            raise InfeasibleConfig(f"duration quantile fraction must lie in [0, 1], got {q_fraction}")
        if not self.min_duration_s < q_threshold <= self.max_duration_s:
            raise InfeasibleConfig("need min_duration_s < duration quantile threshold <= max_duration_s")
        lat_min, lat_max, lon_min, lon_max = self.bbox
        if not (-90 <= lat_min < lat_max <= 90 and -180 <= lon_min < lon_max < 180):
            raise InfeasibleConfig(f"invalid bbox {self.bbox}")


@dataclass(frozen=True)
class InjectedPair:
    flight_a: str
    flight_b: str
    point_id: str
    fl: int


@dataclass(frozen=True)
class GroundTruth:
    ghost_flight_ids: frozenset[str]
    true_threshold_s: int
    planted_deviations: dict[str, int]
    injected_conflict_pairs: list[InjectedPair]
    rerouted_flight_ids: frozenset[str] = frozenset()
    cancelled_flight_ids: frozenset[str] = frozenset()

    def to_json(self) -> str:
        payload = {
            "true_threshold_s": self.true_threshold_s,
            "ghost_flight_ids": sorted(self.ghost_flight_ids),
            "rerouted_flight_ids": sorted(self.rerouted_flight_ids),
            "cancelled_flight_ids": sorted(self.cancelled_flight_ids),
            "planted_deviations": dict(sorted(self.planted_deviations.items())),
            "injected_conflict_pairs": [
                {"flight_a": p.flight_a, "flight_b": p.flight_b, "point_id": p.point_id, "fl": p.fl}
                for p in self.injected_conflict_pairs
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


class _Rng:
    def __init__(self, seed: int):
        self._r = random.Random(seed)

    def uniform(self) -> float:
        return self._r.random()

    def below(self, n: int) -> int:
        return min(int(self._r.random() * n), n - 1)

    def between(self, lo: int, hi: int) -> int:
        return lo + self.below(hi - lo + 1)

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass
class _Flight:
    flight_id: str
    role: str  # genuine | ghost | rerouted | cancelled
    deviation: int = 0
    sign: int = 1
    high_cruise: bool = False
    cruise: int = 0
    m1: list[Segment] = field(default_factory=list)
    m3: list[Segment] = field(default_factory=list)


class _Builder:
    def __init__(self, config: SynthConfig, rng: _Rng):
        self.cfg = config
        self.rng = rng
        self.points = self._make_points()
        self.occupancy: dict[tuple[str, int], list[tuple[int, str]]] = {}

    def _make_points(self) -> list[tuple[str, float, float]]:
        cfg = self.cfg
        n = cfg.n_points if cfg.n_points is not None else max(500, 2 * cfg.n_flights)
        lat_min, lat_max, lon_min, lon_max = cfg.bbox
        width = len(str(n - 1))
        seen: set[tuple[float, float]] = set()
        points = []
        attempts = 0
        while len(points) < n:
            attempts += 1
            if attempts > 20 * n + 100:
                raise InfeasibleConfig(f"bbox {cfg.bbox} too small to place {n} distinct points")
            lat = round(lat_min + self.rng.uniform() * (lat_max - lat_min), 6)
            lon = round(lon_min + self.rng.uniform() * (lon_max - lon_min), 6)
            if (lat, lon) in seen or lon >= 180.0:
                continue
            seen.add((lat, lon))
            points.append((f"P{len(points):0{width}d}", lat, lon))
        return points

    def duration(self) -> int:
        threshold, fraction = self.cfg.duration_quantile
        if self.rng.uniform() < fraction:
            lo, hi = self.cfg.min_duration_s, threshold
            value = math.floor(math.exp(math.log(lo) + self.rng.uniform() * (math.log(hi) - math.log(lo))))
            return min(max(value, lo), hi - 1)
        lo, hi = threshold, self.cfg.max_duration_s
        value = math.floor(math.exp(math.log(lo) + self.rng.uniform() * (math.log(hi) - math.log(lo))))
        return min(max(value, lo), hi)

    def cruise_level(self, high: bool) -> int:
        if not high and self.rng.uniform() < self.cfg.low_level_fraction:
            return 10 * self.rng.between(10, DEFAULT_MIN_FL // 10 - 1)
        return 10 * self.rng.between(DEFAULT_MIN_FL // 10, 40)

    def route_points(self, k: int, exclude: set[int]) -> list[int]:
        chosen: list[int] = []
        taken = set(exclude)
        if len(self.points) - len(taken) < k:
            raise InfeasibleConfig("not enough significant points for the requested route lengths")
        while len(chosen) < k:
            idx = self.rng.below(len(self.points))
            if idx not in taken:
                taken.add(idx)
                chosen.append(idx)
        return chosen

    def plan(
        self, flight: _Flight, route: list[int], cruise: int, departure: int, durations: list[int],
        origin: str, destination: str, aircraft: str,
    ) -> list[Segment]:
        k = len(route) - 1
        fls = [cruise] * (k + 1)
        fls[0] = 10 * self.rng.between(1, 5)
        fls[-1] = 10 * self.rng.between(1, 5)
        segments = []
        t = departure
        for i in range(k):
            _, lat0, lon0 = self.points[route[i]]
            _, lat1, lon1 = self.points[route[i + 1]]
            phase = Phase.CLIMB if i == 0 else Phase.DESCENT if i == k - 1 else Phase.ENROUTE
            segments.append(
                Segment(
                    flight.flight_id, origin, destination, aircraft,
                    self.points[route[i]][0], self.points[route[i + 1]][0],
                    t, t + durations[i], lat0, lon0, fls[i], lat1, lon1, fls[i + 1], phase,
                    _distance_nm(lat0, lon0, lat1, lon1),
                )
            )
            t += durations[i]
        return segments

    def clear(self, flight_id: str, segments: list[Segment], allowed: tuple[tuple[str, int], str] | None = None) -> bool:
        for point_id, fl, t in _endpoints(segments):
            for t_other, other in self.occupancy.get((point_id, fl), ()):
                if other == flight_id or abs(t - t_other) >= CLEARANCE_S:
                    continue
                if allowed is not None and allowed == ((point_id, fl), other):
                    continue
                return False
        return True

    def occupy(self, flight_id: str, segments: list[Segment]) -> None:
        for point_id, fl, t in set(_endpoints(segments)):
            self.occupancy.setdefault((point_id, fl), []).append((t, flight_id))

    def _shifted(self, segments: list[Segment], delta: int) -> list[Segment]:
        return [_shift(seg, delta) for seg in segments]

    def _meta(self) -> tuple[str, str, str]:
        origin = AIRPORTS[self.rng.below(len(AIRPORTS))]
        destination = AIRPORTS[self.rng.below(len(AIRPORTS))]
        return origin, destination, AIRCRAFT_TYPES[self.rng.below(len(AIRCRAFT_TYPES))]

    def build(self, flight: _Flight) -> None:
        cfg = self.cfg
        lo, hi = cfg.segments_per_flight
        for _ in range(_MAX_ATTEMPTS):
            k = self.rng.between(lo, hi)
            route = self.route_points(k + 1, set())
            cruise = self.cruise_level(flight.high_cruise)
            durations = [self.duration() for _ in range(k)]
            departure = 3 * cfg.true_threshold_s + self.rng.below(DAY_S)
            m1 = self.plan(flight, route, cruise, departure, durations, *self._meta())
            if flight.role == "cancelled":
                m3: list[Segment] = []
            elif flight.role == "rerouted":
                detour = self.route_points(k + 1, set(route))
                new_durations = [self.duration() for _ in range(k)]
                m3 = self.plan(flight, detour, cruise, departure, new_durations,
                               m1[0].origin, m1[0].destination, m1[0].aircraft_type)
            else:
                m3 = self._shifted(m1, flight.sign * flight.deviation)
            if self.clear(flight.flight_id, m3):
                flight.cruise, flight.m1, flight.m3 = cruise, m1, m3
                self.occupy(flight.flight_id, m3)
                return
        raise InfeasibleConfig(f"could not place flight {flight.flight_id} without accidental conflicts")

    def build_follower(self, anchor: _Flight, follower: _Flight) -> InjectedPair:
        """Route ``follower`` through one of ``anchor``'s en-route points so that
        their m3 passages are less than the separation minimum apart."""
        cfg = self.cfg
        lo, hi = cfg.segments_per_flight
        anchor_points = {seg.begin_point_id for seg in anchor.m1} | {anchor.m1[-1].end_point_id}
        by_name = {name: i for i, (name, _, _) in enumerate(self.points)}
        exclude = {by_name[p] for p in anchor_points}
        for _ in range(_MAX_ATTEMPTS):
            m_a = self.rng.between(1, len(anchor.m3) - 2)
            meet = anchor.m3[m_a]
            k = self.rng.between(lo, hi)
            m_b = self.rng.between(1, k - 2)
            route = self.route_points(k, exclude)
            route.insert(m_b, by_name[meet.begin_point_id])
            durations = [self.duration() for _ in range(k)]
            offset = self.rng.between(-(DEFAULT_MAX_SEPARATION_S - 1), DEFAULT_MAX_SEPARATION_S - 1)
            shift = follower.sign * follower.deviation
            t_meet_m1 = meet.t_begin + offset - shift
            departure = t_meet_m1 - sum(durations[:m_b])
            if departure < 0 or departure + shift < 0:
                continue
            m1 = self.plan(follower, route, anchor.cruise, departure, durations, *self._meta())
            m3 = self._shifted(m1, shift)
            if self.clear(follower.flight_id, m3, allowed=((meet.begin_point_id, anchor.cruise), anchor.flight_id)):
                follower.cruise, follower.m1, follower.m3 = anchor.cruise, m1, m3
                self.occupy(follower.flight_id, m3)
                a, b = sorted((anchor.flight_id, follower.flight_id))
                return InjectedPair(a, b, meet.begin_point_id, anchor.cruise)
        raise InfeasibleConfig(f"could not inject a conflict for ghost flight {anchor.flight_id}")


def _endpoints(segments: list[Segment]):
    for seg in segments:
        yield seg.begin_point_id, seg.fl_begin, seg.t_begin
        yield seg.end_point_id, seg.fl_end, seg.t_end


def _shift(seg: Segment, delta: int) -> Segment:
    return Segment(
        seg.flight_id, seg.origin, seg.destination, seg.aircraft_type, seg.begin_point_id, seg.end_point_id,
        seg.t_begin + delta, seg.t_end + delta, seg.lat_begin, seg.lon_begin, seg.fl_begin,
        seg.lat_end, seg.lon_end, seg.fl_end, seg.phase, seg.distance,
    )


def _distance_nm(lat0: float, lon0: float, lat1: float, lon1: float) -> float:
    # equirectangular approximation; 60 NM per degree of latitude
    dlat = lat1 - lat0
    dlon = (lon1 - lon0) * math.cos(math.radians((lat0 + lat1) / 2))
    return round(60.0 * math.hypot(dlat, dlon), 2)


def generate(config: SynthConfig = SynthConfig()) -> tuple[TrajectoryDataset, TrajectoryDataset, GroundTruth]:
    """Build ``(m1, m3, truth)``; fully determined by ``config``."""
    cfg = config
    rng = _Rng(cfg.seed)
    builder = _Builder(cfg, rng)
    n = cfg.n_flights
    width = max(5, len(str(n - 1)))
    flights = [_Flight(f"F{i:0{width}d}", "genuine") for i in range(n)]

    order = list(range(n))
    rng.shuffle(order)
    n_cancel = round(cfg.cancel_fraction * n)
    n_reroute = round(cfg.reroute_fraction * (n - n_cancel))
    n_ghost = round(cfg.ghost_fraction * (n - n_cancel - n_reroute))
    cancelled = order[:n_cancel]
    rerouted = order[n_cancel:n_cancel + n_reroute]
    ghosts = order[n_cancel + n_reroute:n_cancel + n_reroute + n_ghost]
    genuine = order[n_cancel + n_reroute + n_ghost:]
    for i in cancelled:
        flights[i].role = "cancelled"
    for i in rerouted:
        flights[i].role = "rerouted"

    delta = cfg.true_threshold_s
    genuine_lo, genuine_hi = (11 * delta + 9) // 10, 3 * delta
    for i in genuine:
        flights[i].deviation = rng.between(genuine_lo, genuine_hi)
        flights[i].sign = 1 if rng.uniform() < 0.5 else -1
    for i in ghosts:
        flights[i].role = "ghost"
        flights[i].deviation = rng.between(0, delta - 1)
        flights[i].sign = 1 if rng.uniform() < 0.5 else -1

    n_pairs = round(cfg.conflict_injection_rate * n_ghost)
    if n_pairs > n_ghost // 2:
        raise InfeasibleConfig(
            f"{n_pairs} injected pairs need {2 * n_pairs} ghost flights, only {n_ghost} available"
        )
    ranked = sorted(ghosts, key=lambda i: (-flights[i].deviation, flights[i].flight_id))
    slots = n_ghost // 2
    if n_pairs == 1:
        chosen = [0]
    else:
        chosen = [round(k * (slots - 1) / (n_pairs - 1)) for k in range(n_pairs)]
    pairs = [(ranked[2 * j], ranked[2 * j + 1]) for j in chosen]
    if pairs:
        # boundary witness: the last conflict disappears exactly at the threshold
        for i in pairs[0]:
            flights[i].deviation = delta - 1
    for a, b in pairs:
        flights[a].high_cruise = True
        flights[b].high_cruise = True

    followers = {b for _, b in pairs}
    for flight_idx in range(n):
        if flight_idx not in followers:
            builder.build(flights[flight_idx])
    injected = [builder.build_follower(flights[a], flights[b]) for a, b in pairs]

    m1_segments = sorted((s for f in flights for s in f.m1), key=segment_sort_key)
    m3_segments = sorted((s for f in flights for s in f.m3), key=segment_sort_key)
    m1 = TrajectoryDataset(Kind.M1, cfg.day, tuple(m1_segments))
    m3 = TrajectoryDataset(Kind.M3, cfg.day, tuple(m3_segments))
    truth = GroundTruth(
        ghost_flight_ids=frozenset(f.flight_id for f in flights if f.role == "ghost"),
        true_threshold_s=delta,
        planted_deviations={f.flight_id: f.deviation for f in flights if f.role in ("ghost", "genuine")},
        injected_conflict_pairs=sorted(injected, key=lambda p: (p.flight_a, p.flight_b)),
        rerouted_flight_ids=frozenset(f.flight_id for f in flights if f.role == "rerouted"),
        cancelled_flight_ids=frozenset(f.flight_id for f in flights if f.role == "cancelled"),
    )
    return m1, m3, truth
