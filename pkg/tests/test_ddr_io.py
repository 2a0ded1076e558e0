import datetime as dt

import pytest
from hypothesis import given, settings

from ghostfilter.ddr_io import (
    canonicalize,
    match_datasets,
    parse_segment_file,
    write_segment_file,
)
from ghostfilter.errors import DayMismatch, DuplicateSegment, InvalidHeader, MalformedRow
from ghostfilter.segment_model import Kind, Phase, derive_crossings

from conftest import dataset, seg, segment_lists

HEADER = "SEGv1,day=2011-06-01,kind=M1\n"
ROW = "AFR123,LFPG,EDDF,A320,PG01,PG02,3600,3720,48.500000,2.300000,50,48.900000,2.900000,150,CLIMB,12.34\n"


def test_single_row_fields():
    d = parse_segment_file((HEADER + ROW).encode())
    assert d.kind is Kind.M1 and d.day == dt.date(2011, 6, 1)
    (s,) = d.segments
    assert (s.flight_id, s.origin, s.destination, s.aircraft_type) == ("AFR123", "LFPG", "EDDF", "A320")
    assert (s.begin_point_id, s.end_point_id, s.t_begin, s.t_end) == ("PG01", "PG02", 3600, 3720)
    assert (s.lat_begin, s.lon_begin, s.fl_begin) == (48.5, 2.3, 50)
    assert (s.lat_end, s.lon_end, s.fl_end) == (48.9, 2.9, 150)
    assert s.phase is Phase.CLIMB and s.distance == 12.34


def test_bad_latitude_names_column():
    row = ROW.replace("48.500000", "95.0")
    with pytest.raises(MalformedRow) as err:
        parse_segment_file(HEADER + row)
    assert err.value.column == "lat_begin" and err.value.line == 2


@pytest.mark.parametrize(
    "old,new,column",
    [
        ("3600", "36x0", "t_begin"),
        (",CLIMB,", ",TAXI,", "phase"),
        (",150,", ",-150,", "fl_end"),
        ("12.34", "nan", "distance"),
        (",3720,", ",3000,", "t_end"),
    ],
)
def test_malformed_values(old, new, column):
    with pytest.raises(MalformedRow) as err:
        parse_segment_file(HEADER + ROW.replace(old, new, 1))
    assert err.value.column == column


def test_wrong_column_count():
    with pytest.raises(MalformedRow):
        parse_segment_file(HEADER + ROW.replace(",12.34", ""))


@pytest.mark.parametrize(
    "header",
    ["", "SEGv2,day=2011-06-01,kind=M1\n", "SEGv1,day=2011-13-01,kind=M1\n", "SEGv1,day=2011-06-01,kind=M2\n"],
)
def test_invalid_header(header):
    with pytest.raises(InvalidHeader):
        parse_segment_file(header + ROW)


def test_duplicate_rows_rejected():
    with pytest.raises(DuplicateSegment):
        parse_segment_file(HEADER + ROW + ROW)


def test_comments_and_blank_lines_ignored():
    text = "# produced by hand\n" + HEADER + "\n# a comment\n" + ROW
    assert write_segment_file(parse_segment_file(text)) == (HEADER + ROW).encode()


def test_empty_dataset_writes_header_only():
    assert write_segment_file(dataset([], kind=Kind.M1)) == HEADER.encode()


def test_single_segment_writes_one_row():
    out = write_segment_file(parse_segment_file(HEADER + ROW)).decode()
    assert out.count("\n") == 2 and out.endswith("\n")


def test_writer_sorts_and_formats():
    d = dataset([seg("F2", "A", "B", 10, 20), seg("F1", "B", "C", 50, 60), seg("F1", "A", "B", 0, 50)])
    lines = write_segment_file(d).decode().splitlines()
    assert [line.split(",")[0] + "@" + line.split(",")[6] for line in lines[1:]] == ["F1@0", "F1@50", "F2@10"]
    assert lines[1].split(",")[8] == "48.500000"
    assert lines[1].split(",")[15] == "12.50"


@given(segment_lists())
@settings(max_examples=200, deadline=None)
def test_round_trip(segments):
    d = dataset(segments)
    data = write_segment_file(d)
    back = parse_segment_file(data)
    assert write_segment_file(back) == data
    assert sorted(back.segments, key=repr) == sorted(d.segments, key=repr)


def test_canonicalize_idempotent():
    messy = "# x\n" + HEADER + ROW.replace("48.500000", "48.5").replace("12.34", "12.340")
    once = canonicalize(messy)
    assert canonicalize(once) == once
    assert once == (HEADER + ROW).encode()


def test_match_identical():
    d = dataset([seg("F1", "A", "B", 0, 100), seg("F1", "B", "C", 100, 200)])
    report = match_datasets(dataset(d.segments, Kind.M1), d)
    assert report.m3_only_pct == 0 and report.m1_only == [] and len(report.matched) == 3


def test_match_m3_flight_absent_from_m1():
    m1 = dataset([seg("F1", "A", "B", 0, 100)], Kind.M1)
    m3 = dataset([seg("F1", "A", "B", 10, 110), seg("F2", "C", "D", 0, 50)])
    report = match_datasets(m1, m3)
    assert {c.flight_id for c in report.m3_only} == {"F2"} and len(report.m3_only) == 2
    assert report.m3_only_pct == 50.0
    assert report.m3_only_segment_pct == 50.0


def test_match_repeated_point_pairs_in_time_order():
    # holding pattern: F1 passes A twice in m3, once in m1
    m1 = dataset([seg("F1", "A", "B", 0, 100)], Kind.M1)
    m3 = dataset([seg("F1", "A", "C", 0, 50), seg("F1", "C", "A", 50, 120), seg("F1", "A", "B", 120, 200)])
    report = match_datasets(m1, m3)
    a_pairs = [(c1.t, c3.t) for c1, c3 in report.matched if c1.point_id == "A"]
    assert a_pairs == [(0, 0)]
    assert sorted(c.t for c in report.m3_only if c.point_id == "A") == [120]


def test_match_day_mismatch():
    with pytest.raises(DayMismatch):
        match_datasets(dataset([], Kind.M1, dt.date(2011, 6, 1)), dataset([], Kind.M3, dt.date(2011, 6, 2)))


@given(segment_lists(), segment_lists())
@settings(max_examples=150, deadline=None)
def test_match_partitions_and_symmetry(s1, s3):
    m1, m3 = dataset(s1, Kind.M1), dataset(s3, Kind.M3)
    forward = match_datasets(m1, m3)
    backward = match_datasets(dataset(s3, Kind.M1), dataset(s1, Kind.M3))
    assert len(forward.matched) == len(backward.matched)
    assert sorted([c3 for _, c3 in forward.matched] + forward.m3_only) == sorted(derive_crossings(m3))
    assert sorted([c1 for c1, _ in forward.matched] + forward.m1_only) == sorted(derive_crossings(m1))
    assert 0 <= forward.m3_only_pct <= 100
    m3_keys = {(c.flight_id, c.point_id) for c in derive_crossings(m3)}
    m1_keys = {(c.flight_id, c.point_id) for c in derive_crossings(m1)}
    if m3_keys <= m1_keys and all(
        sum(1 for c in derive_crossings(m3) if (c.flight_id, c.point_id) == k)
        <= sum(1 for c in derive_crossings(m1) if (c.flight_id, c.point_id) == k)
        for k in m3_keys
    ):
        assert forward.m3_only_pct == 0
