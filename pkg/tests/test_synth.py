import json
import math

import pytest

from ghostfilter.conflict import detect_conflicts
from ghostfilter.ddr_io import match_datasets, write_segment_file
from ghostfilter.errors import InfeasibleConfig
from ghostfilter.ghost_filter import compute_deviations
from ghostfilter.segment_model import derive_crossings
from ghostfilter.stats import quantile_below
from ghostfilter.synth import SynthConfig, generate

from conftest import small_config


def test_same_seed_gives_identical_bytes():
    a = generate(small_config(17, n_flights=120))
    b = generate(small_config(17, n_flights=120))
    assert write_segment_file(a[0]) == write_segment_file(b[0])
    assert write_segment_file(a[1]) == write_segment_file(b[1])
    assert a[2].to_json() == b[2].to_json()


def test_different_seeds_differ():
    assert write_segment_file(generate(small_config(1))[1]) != write_segment_file(generate(small_config(2))[1])


def test_no_ghosts_means_no_small_deviations():
    m1, m3, truth = generate(small_config(4, n_flights=200, ghost_fraction=0.0, conflict_injection_rate=0.0))
    assert truth.ghost_flight_ids == frozenset() and truth.injected_conflict_pairs == []
    finite = [r.deviation_s for r in compute_deviations(m1, m3) if math.isfinite(r.deviation_s)]
    assert min(finite) >= 1.1 * truth.true_threshold_s


def test_role_counts():
    _, _, truth = generate(SynthConfig(seed=3, n_flights=1000))
    assert len(truth.cancelled_flight_ids) == 50
    assert len(truth.rerouted_flight_ids) == 48
    assert len(truth.ghost_flight_ids) == round(0.3 * 902)
    assert len(truth.injected_conflict_pairs) == round(0.2 * len(truth.ghost_flight_ids))


def test_planted_deviation_bands():
    _, _, truth = generate(SynthConfig(seed=5, n_flights=800))
    delta = truth.true_threshold_s
    for flight, dev in truth.planted_deviations.items():
        if flight in truth.ghost_flight_ids:
            assert 0 <= dev < delta
        else:
            assert 1.1 * delta <= dev <= 3 * delta


def test_cancelled_flights_only_in_m1():
    m1, m3, truth = generate(small_config(6, n_flights=100))
    m3_flights = {s.flight_id for s in m3.segments}
    m1_flights = {s.flight_id for s in m1.segments}
    assert truth.cancelled_flight_ids <= m1_flights - m3_flights


def test_rerouted_flights_share_no_points_with_m1():
    m1, m3, truth = generate(small_config(8, n_flights=100))
    report = match_datasets(m1, m3)
    assert {c.flight_id for c in report.m3_only} == set(truth.rerouted_flight_ids)


@pytest.mark.parametrize("seed", range(10))
def test_injected_pairs_are_exactly_the_conflicts(seed):
    _, m3, truth = generate(small_config(seed, n_flights=150))
    found = {
        (p.crossing_a.flight_id, p.crossing_b.flight_id, p.point_id, p.fl)
        for p in detect_conflicts(derive_crossings(m3))
    }
    planted = {(p.flight_a, p.flight_b, p.point_id, p.fl) for p in truth.injected_conflict_pairs}
    assert found == planted
    for p in truth.injected_conflict_pairs:
        assert {p.flight_a, p.flight_b} <= truth.ghost_flight_ids


def test_boundary_witness_sits_just_below_threshold():
    _, _, truth = generate(small_config(2, n_flights=150))
    top = max(truth.planted_deviations[f] for p in truth.injected_conflict_pairs for f in (p.flight_a, p.flight_b))
    assert top == truth.true_threshold_s - 1


def test_duration_quantile_is_planted():
    m1, m3, _ = generate(SynthConfig(seed=9, n_flights=3000))
    assert abs(quantile_below(m1, 120) - 0.80) <= 0.02
    assert abs(quantile_below(m3, 120) - 0.80) <= 0.02


def test_truth_json_round_trips():
    _, _, truth = generate(small_config(3))
    payload = json.loads(truth.to_json())
    assert payload["true_threshold_s"] == truth.true_threshold_s
    assert set(payload["ghost_flight_ids"]) == truth.ghost_flight_ids
    assert len(payload["injected_conflict_pairs"]) == len(truth.injected_conflict_pairs)


@pytest.mark.parametrize(
    "overrides",
    [
        dict(ghost_fraction=1.5),
        dict(n_flights=0),
        dict(segments_per_flight=(2, 5)),
        dict(segments_per_flight=(6, 5)),
        dict(true_threshold_s=0),
        dict(conflict_injection_rate=-0.1),
        dict(duration_quantile=(120, 1.2)),
        dict(duration_quantile=(4000, 0.8)),
        dict(bbox=(50.0, 40.0, 0.0, 10.0)),
    ],
)
def test_invalid_config(overrides):
    with pytest.raises(InfeasibleConfig):
        SynthConfig(**overrides)


def test_too_many_injected_pairs():
    with pytest.raises(InfeasibleConfig):
        generate(small_config(1, conflict_injection_rate=0.9))


def test_too_few_points_for_routes():
    with pytest.raises(InfeasibleConfig):
        generate(small_config(1, n_points=3))
