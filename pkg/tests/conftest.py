from __future__ import annotations

import datetime as dt

import pytest
from hypothesis import strategies as st

from ghostfilter.segment_model import Kind, Phase, Segment, TrajectoryDataset
from ghostfilter.synth import SynthConfig, generate

DAY = dt.date(2011, 6, 1)

# fixed coordinates per point keep hand-built datasets readable
POINTS = {
    "A": (48.5, 2.3),
    "B": (49.0, 3.0),
    "C": (50.25, 4.125),
    "D": (51.0, -0.5),
    "E": (47.75, 8.5),
}


def seg(
    flight: str,
    begin: str,
    end: str,
    t0: int,
    t1: int,
    fl0: int = 350,
    fl1: int | None = None,
    phase: Phase = Phase.ENROUTE,
) -> Segment:
    lat0, lon0 = POINTS.get(begin, (45.0, 5.0))
    lat1, lon1 = POINTS.get(end, (46.0, 6.0))
    return Segment(
        flight, "EDDF", "LFPG", "A320", begin, end, t0, t1,
        lat0, lon0, fl0, lat1, lon1, fl0 if fl1 is None else fl1, phase, 12.5,
    )


def dataset(segments, kind: Kind = Kind.M3, day: dt.date = DAY) -> TrajectoryDataset:
    return TrajectoryDataset(kind, day, tuple(segments))


@st.composite
def segment_lists(draw, max_flights: int = 4, max_segments: int = 5, points: str = "ABCD"):
    """Valid per-flight segment chains; small alphabets force shared points,
    repeated visits and zero-length legs."""
    segments = []
    keys = set()
    for f in range(draw(st.integers(0, max_flights))):
        flight = f"F{f}"
        t = draw(st.integers(0, 400))
        here = draw(st.sampled_from(points))
        for _ in range(draw(st.integers(1, max_segments))):
            there = draw(st.sampled_from(points))
            duration = draw(st.integers(0, 150))
            fl0 = draw(st.sampled_from([150, 200, 350]))
            fl1 = draw(st.sampled_from([fl0, 200, 350]))
            phase = draw(st.sampled_from(list(Phase)))
            lat = draw(st.integers(-90_000_000, 90_000_000)) / 1e6
            lon = draw(st.integers(-180_000_000, 179_999_999)) / 1e6
            key = (flight, here, t)
            if key not in keys:
                keys.add(key)
                segments.append(
                    Segment(flight, "EDDF", "EGLL", "B738", here, there, t, t + duration,
                            lat, lon, fl0, 45.0, 5.0, fl1, phase, round(duration * 0.13, 2))
                )
            t += duration
            if draw(st.booleans()):
                t += draw(st.integers(1, 90))
                there = draw(st.sampled_from(points))
            here = there
    return segments


def small_config(seed: int, **overrides) -> SynthConfig:
    params = dict(
        seed=seed, n_flights=30, ghost_fraction=0.5, reroute_fraction=0.1, cancel_fraction=0.1,
        conflict_injection_rate=0.4, segments_per_flight=(3, 6),
    )
    params.update(overrides)
    return SynthConfig(**params)


@pytest.fixture(scope="session")
def default_run():
    """The reference synthetic day: default config, 5 000 flights, seed 7."""
    return generate(SynthConfig(seed=7, n_flights=5000, true_threshold_s=2000))


# acceptance reporting: one PASS/FAIL line per criterion at the end of the run
_acceptance: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    label = getattr(item.function, "criterion", None)
    if label is None or report.when == "teardown":
        return
    if report.when == "setup" and report.passed:
        return
    if report.failed:
        _acceptance[label] = "FAIL"
    elif report.when == "call":
        _acceptance.setdefault(label, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s.split()[0][2:])):
        terminalreporter.write_line(f"{_acceptance[label]:4}  {label}")
