import csv
import datetime as dt
import hashlib
import json
import subprocess
import sys

import pytest

from ghostfilter.cli import build_parser, run
from ghostfilter.ddr_io import read_segment_path, write_segment_path
from ghostfilter.segment_model import Kind, TrajectoryDataset


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert run(["generate", "--seed", "11", "--flights", "400", "-o", str(out)]) == 0
    return out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_generate_writes_pair_and_truth(generated):
    assert {p.name for p in generated.iterdir()} == {"m1.seg", "m3.seg", "truth.json", "manifest.json"}
    assert read_segment_path(generated / "m1.seg").kind is Kind.M1
    assert json.loads((generated / "truth.json").read_text())["true_threshold_s"] == 2000


def test_manifest_hashes_outputs(generated):
    manifest = json.loads((generated / "manifest.json").read_text())
    assert manifest["subcommand"] == "generate" and manifest["params"]["seed"] == 11
    for name, digest in manifest["outputs"].items():
        assert hashlib.sha256((generated / name).read_bytes()).hexdigest() == digest


def test_stats_outputs(generated, tmp_path):
    code = run(["stats", "--m1", str(generated / "m1.seg"), "--m3", str(generated / "m3.seg"), "-o", str(tmp_path)])
    assert code == 0
    for name in ("daily_counts.csv", "histogram.csv", "grid_1.0.csv", "grid_0.1.csv", "summary.json"):
        assert (tmp_path / name).exists()
    (day,) = rows(tmp_path / "daily_counts.csv")
    assert day["day"] == "2011-06-01"


def test_conflicts_outputs(generated, tmp_path):
    assert run(["conflicts", "--m3", str(generated / "m3.seg"), "-o", str(tmp_path)]) == 0
    cumulative = rows(tmp_path / "cumulative.csv")
    assert len(cumulative) == 121
    assert int(cumulative[-1]["count"]) == len(rows(tmp_path / "conflicts.csv"))


def test_sweep_estimates_planted_threshold(generated, tmp_path):
    args = ["sweep", "--m1", str(generated / "m1.seg"), "--m3", str(generated / "m3.seg"), "-o", str(tmp_path)]
    assert run(args) == 0
    assert json.loads((tmp_path / "estimate.json").read_text())["delta_t_s"] == 2000
    assert rows(tmp_path / "sweep.csv")[0]["threshold_s"] == "0"


def test_filter_with_explicit_threshold(generated, tmp_path):
    args = ["filter", "--m1", str(generated / "m1.seg"), "--m3", str(generated / "m3.seg"),
            "--threshold", "2000", "-o", str(tmp_path)]
    assert run(args) == 0
    assert not (tmp_path / "sweep.csv").exists()
    assert len(read_segment_path(tmp_path / "filtered.seg")) < len(read_segment_path(generated / "m3.seg"))


def test_pipeline_reduces_conflicts(generated, tmp_path):
    args = ["pipeline", "--m1", str(generated / "m1.seg"), "--m3", str(generated / "m3.seg"), "-o", str(tmp_path)]
    assert run(args) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["conflicts_after"] <= summary["conflicts_before"]
    assert summary["conflicts_before"] > 0 and summary["conflicts_after"] == 0


def test_day_mismatch_exits_2(generated, tmp_path):
    other = TrajectoryDataset(Kind.M1, dt.date(2011, 6, 2), ())
    write_segment_path(other, tmp_path / "other.seg")
    args = ["sweep", "--m1", str(tmp_path / "other.seg"), "--m3", str(generated / "m3.seg"), "-o", str(tmp_path / "o")]
    assert run(args) == 2


def test_missing_file_exits_2(tmp_path):
    assert run(["conflicts", "--m3", str(tmp_path / "nope.seg"), "-o", str(tmp_path)]) == 2


def test_malformed_file_exits_2(tmp_path, capsys):
    (tmp_path / "bad.seg").write_text("SEGv1,day=2011-06-01,kind=M3\nnot,a,row\n")
    assert run(["conflicts", "--m3", str(tmp_path / "bad.seg"), "-o", str(tmp_path)]) == 2
    assert "MalformedRow" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["sweep", "--m1", "a.seg"],
        ["conflicts", "--m3", "x.seg", "--max-sep", "0", "-o", "o"],
        ["sweep", "--m1", "a", "--m3", "b", "--estimator", "median", "-o", "o"],
    ],
)
def test_usage_errors_exit_1(argv):
    assert run(argv) == 1


def test_stats_unpaired_inputs_exit_1(generated, tmp_path):
    args = ["stats", "--m1", str(generated / "m1.seg"), "--m1", str(generated / "m1.seg"),
            "--m3", str(generated / "m3.seg"), "-o", str(tmp_path)]
    assert run(args) == 1


def test_help_documents_defaults():
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices
    text = sub["pipeline"].format_help()
    assert "120" in text and "200" in text and "default: 0.0" in text and "first-below-eps" in text


def test_replay_is_byte_identical(generated, tmp_path):
    first = tmp_path / "first"
    args = ["pipeline", "--m1", str(generated / "m1.seg"), "--m3", str(generated / "m3.seg"), "-o", str(first)]
    assert run(args) == 0
    second = tmp_path / "second"
    assert run(["replay", str(first / "manifest.json"), "-o", str(second), "--jobs", "3"]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_replay_unreadable_manifest(tmp_path):
    (tmp_path / "manifest.json").write_text("{")
    assert run(["replay", str(tmp_path / "manifest.json")]) == 2


def test_module_entry_point():
    result = subprocess.run([sys.executable, "-m", "ghostfilter", "--version"], capture_output=True, text=True)
    assert result.returncode == 0 and result.stdout.startswith("ghostfilter ")
