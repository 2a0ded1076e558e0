"""``ghostfilter`` command line.

Exit codes: 0 success, 1 usage error, 2 data error. Every run writes a
``manifest.json`` next to its outputs; ``ghostfilter replay`` re-executes it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .conflict import DEFAULT_MAX_SEPARATION_S, DEFAULT_MIN_FL, ConflictParams, cumulative_by_separation, detect_conflicts
from .ddr_io import match_datasets, read_segment_path, write_segment_file
from .errors import GhostFilterError
from .export import (
    conflicts_csv,
    cumulative_csv,
    daily_counts_csv,
    estimate_json,
    grid_csv,
    histogram_csv,
    sweep_csv,
)
from .ghost_filter import (
    DEFAULT_SWEEP_STEP_S,
    Denominator,
    Estimator,
    Granularity,
    compute_deviations,
    default_thresholds,
    estimate_threshold,
    filter_at,
    kept_crossings,
    sweep,
)
from .segment_model import derive_crossings
from .stats import daily_counts, duration_histogram, log_edges, merge_grids, merge_histograms, quantile_below, spatial_grid
from .synth import SynthConfig, generate

log = logging.getLogger("ghostfilter")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
GRID_SIZES = (1.0, 0.1)
QUANTILE_THRESHOLD_S = 120


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse default exits with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sweep_max(value: str) -> int | None:
    if value == "auto":
        return None
    try:
        result = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {value!r}") from None
    if result < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return result


def _positive_int(value: str) -> int:
    result = int(value)
    if result <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return result


def _u64(value: str) -> int:
    result = int(value)
    if not 0 <= result < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return result


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--out", required=True, type=Path, help="output directory (created if missing)")


def _add_conflict_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-sep", type=_positive_int, default=DEFAULT_MAX_SEPARATION_S,
                   help="conflict when passages are strictly closer than this many seconds (default: %(default)s)")
    p.add_argument("--min-fl", type=int, default=DEFAULT_MIN_FL,
                   help="both aircraft at or above this flight level (default: %(default)s, i.e. 20 000 ft)")


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--granularity", choices=[g.value for g in Granularity], default=Granularity.SEGMENT.value,
                   help="drop single segments, or whole flights only when all their deviations are small "
                        "(default: %(default)s)")


def _add_sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sweep-step", type=_positive_int, default=DEFAULT_SWEEP_STEP_S,
                   help="threshold step in seconds (default: %(default)s)")
    p.add_argument("--sweep-max", type=_sweep_max, default=None, metavar="S|auto",
                   help="largest threshold; 'auto' = twice the largest finite deviation (default: auto)")
    p.add_argument("--estimator", choices=[e.value for e in Estimator], default=Estimator.FIRST_BELOW_EPSILON.value,
                   help="transition locator (default: %(default)s)")
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="density floor for first-below-eps, divisor floor for largest-drop (default: %(default)s)")
    p.add_argument("--density-denominator", choices=[d.value for d in Denominator],
                   default=Denominator.SEGMENTS.value,
                   help="square segments or flights in the density denominator (default: %(default)s)")
    p.add_argument("--jobs", type=_positive_int, default=1,
                   help="worker threads for the sweep; outputs do not depend on it (default: %(default)s)")


def _add_pair_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m1", required=True, type=Path, help="planned trajectories (SEG file)")
    p.add_argument("--m3", required=True, type=Path, help="executed trajectories (SEG file)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ghostfilter", description="Detect and remove ghost flights from m1/m3 trajectory data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="write a synthetic m1/m3 pair with planted ground truth")
    defaults = SynthConfig()
    p.add_argument("--seed", type=_u64, default=defaults.seed, help="generator seed (default: %(default)s)")
    p.add_argument("--flights", type=_positive_int, default=defaults.n_flights,
                   help="number of flights (default: %(default)s)")
    _add_out(p)

    p = sub.add_parser("stats", help="daily counts, duration histogram and spatial grids")
    p.add_argument("--m1", required=True, type=Path, action="append",
                   help="m1 SEG file; repeat once per day, paired by position with --m3")
    p.add_argument("--m3", required=True, type=Path, action="append", help="m3 SEG file; repeat once per day")
    _add_out(p)

    p = sub.add_parser("conflicts", help="losses of separation in one dataset")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--m1", type=Path, help="analyse this m1 SEG file")
    group.add_argument("--m3", type=Path, help="analyse this m3 SEG file")
    _add_conflict_flags(p)
    _add_out(p)

    p = sub.add_parser("sweep", help="conflict density versus deviation threshold, and the estimated threshold")
    _add_pair_inputs(p)
    _add_conflict_flags(p)
    _add_filter_flags(p)
    _add_sweep_flags(p)
    _add_out(p)

    p = sub.add_parser("filter", help="remove ghost segments from m3")
    _add_pair_inputs(p)
    p.add_argument("--threshold", type=int, default=None,
                   help="deviation threshold in seconds; estimated from a sweep when omitted")
    _add_conflict_flags(p)
    _add_filter_flags(p)
    _add_sweep_flags(p)
    _add_out(p)

    p = sub.add_parser("pipeline", help="conflicts before, sweep, estimate, filter, conflicts after")
    _add_pair_inputs(p)
    _add_conflict_flags(p)
    _add_filter_flags(p)
    _add_sweep_flags(p)
    _add_out(p)

    p = sub.add_parser("replay", help="re-run a previous invocation from its manifest.json")
    p.add_argument("manifest", type=Path)
    p.add_argument("-o", "--out", type=Path, default=None, help="output directory (default: the manifest's directory)")
    p.add_argument("--jobs", type=_positive_int, default=1, help="worker threads (default: %(default)s)")
    return parser


class _Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.written: dict[str, str] = {}
        root.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, payload: str | bytes) -> None:
        data = payload.encode("utf-8") if isinstance(payload, str) else payload
        (self.root / name).write_bytes(data)
        self.written[name] = hashlib.sha256(data).hexdigest()
        log.info("wrote %s", self.root / name)


def _params(args: argparse.Namespace) -> ConflictParams:
    return ConflictParams(max_separation_s=args.max_sep, min_fl=args.min_fl)


def _run_sweep(args, m1, m3, deviations, out: _Outputs):
    thresholds = default_thresholds(deviations, args.sweep_step, args.sweep_max)
    points = sweep(m1, m3, thresholds, _params(args), Granularity(args.granularity),
                   Denominator(args.density_denominator), jobs=args.jobs, deviations=deviations)
    out.write("sweep.csv", sweep_csv(points))
    estimate = estimate_threshold(points, Estimator(args.estimator), args.epsilon)
    out.write("estimate.json", estimate_json(estimate))
    log.info("estimated threshold: %d s", estimate.delta_t_s)
    return estimate


def cmd_generate(args, out: _Outputs) -> None:
    m1, m3, truth = generate(SynthConfig(seed=args.seed, n_flights=args.flights))
    out.write("m1.seg", write_segment_file(m1))
    out.write("m3.seg", write_segment_file(m3))
    out.write("truth.json", truth.to_json())


def cmd_stats(args, out: _Outputs) -> None:
    if len(args.m1) != len(args.m3):
        raise _UsageError(f"--m1 given {len(args.m1)} times but --m3 {len(args.m3)} times")
    pairs = [(read_segment_path(a), read_segment_path(b)) for a, b in zip(args.m1, args.m3)]
    days = []
    summary = []
    for m1, m3 in pairs:
        report = match_datasets(m1, m3)
        days.append((m1.day, m1, m3))
        summary.append({
            "day": m1.day.isoformat(),
            "m3_only_pct": report.m3_only_pct,
            "m3_only_segment_pct": report.m3_only_segment_pct,
            "fraction_below_120s": quantile_below(m3, QUANTILE_THRESHOLD_S) if m3.segments else None,
        })
    out.write("daily_counts.csv", daily_counts_csv(daily_counts(days)))
    edges = log_edges()
    out.write("histogram.csv", histogram_csv(merge_histograms([duration_histogram(m3, edges) for _, m3 in pairs])))
    for size in GRID_SIZES:
        grid = merge_grids([spatial_grid(m3, size) for _, m3 in pairs])
        out.write(f"grid_{size}.csv", grid_csv(grid))
    summary.sort(key=lambda row: row["day"])
    out.write("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_conflicts(args, out: _Outputs) -> None:
    dataset = read_segment_path(args.m1 if args.m1 is not None else args.m3)
    params = _params(args)
    pairs = detect_conflicts(derive_crossings(dataset), params)
    out.write("conflicts.csv", conflicts_csv(pairs))
    out.write("cumulative.csv", cumulative_csv(cumulative_by_separation(pairs, params.max_separation_s)))


def cmd_sweep(args, out: _Outputs) -> None:
    m1, m3 = read_segment_path(args.m1), read_segment_path(args.m3)
    _run_sweep(args, m1, m3, compute_deviations(m1, m3), out)


def cmd_filter(args, out: _Outputs) -> None:
    m1, m3 = read_segment_path(args.m1), read_segment_path(args.m3)
    deviations = compute_deviations(m1, m3)
    threshold = args.threshold
    if threshold is None:
        threshold = _run_sweep(args, m1, m3, deviations, out).delta_t_s
    out.write("filtered.seg", write_segment_file(filter_at(m3, deviations, threshold, Granularity(args.granularity))))


def cmd_pipeline(args, out: _Outputs) -> None:
    m1, m3 = read_segment_path(args.m1), read_segment_path(args.m3)
    params = _params(args)
    deviations = compute_deviations(m1, m3)
    before = detect_conflicts(derive_crossings(m3), params)
    out.write("conflicts_before.csv", conflicts_csv(before))
    out.write("cumulative_before.csv", cumulative_csv(cumulative_by_separation(before, params.max_separation_s)))

    estimate = _run_sweep(args, m1, m3, deviations, out)
    filtered = filter_at(m3, deviations, estimate.delta_t_s, Granularity(args.granularity))
    out.write("filtered.seg", write_segment_file(filtered))
    after = detect_conflicts(kept_crossings(m3, filtered), params)
    out.write("conflicts_after.csv", conflicts_csv(after))
    out.write("cumulative_after.csv", cumulative_csv(cumulative_by_separation(after, params.max_separation_s)))
    summary = {
        "delta_t_s": estimate.delta_t_s,
        "segments_before": len(m3.segments),
        "segments_after": len(filtered.segments),
        "conflicts_before": len(before),
        "conflicts_after": len(after),
    }
    out.write("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("conflicts: %d before, %d after filtering at %d s", len(before), len(after), estimate.delta_t_s)


COMMANDS: dict[str, Callable[[argparse.Namespace, _Outputs], None]] = {
    "generate": cmd_generate,
    "stats": cmd_stats,
    "conflicts": cmd_conflicts,
    "sweep": cmd_sweep,
    "filter": cmd_filter,
    "pipeline": cmd_pipeline,
}

# execution hints that must not influence outputs, hence kept out of manifests
_NOT_RECORDED = {"command", "out", "jobs"}


class _UsageError(Exception):
    pass


def _manifest(args: argparse.Namespace, out: _Outputs) -> str:
    params = {}
    inputs = {}
    for key, value in sorted(vars(args).items()):
        if key in _NOT_RECORDED:
            continue
        if key in ("m1", "m3"):
            if value is None:
                continue
            paths = value if isinstance(value, list) else [value]
            inputs[key] = [str(Path(p).resolve()) for p in paths]
        else:
            params[key] = value
    payload = {
        "tool": "ghostfilter",
        "version": __version__,
        "subcommand": args.command,
        "inputs": inputs,
        "params": params,
        "outputs": dict(sorted(out.written.items())),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _argv_from_manifest(manifest: dict, out: Path, jobs: int) -> list[str]:
    argv = [manifest["subcommand"]]
    for key, paths in manifest["inputs"].items():
        for path in paths:
            argv += [f"--{key}", path]
    for key, value in manifest["params"].items():
        if value is None:
            continue
        argv += [f"--{key.replace('_', '-')}", str(value)]
    if manifest["subcommand"] in ("sweep", "filter", "pipeline"):
        argv += ["--jobs", str(jobs)]
    return argv + ["-o", str(out)]


def _configure_logging() -> None:
    level = os.environ.get("GHOSTFILTER_LOG", "warn").upper()
    level = {"WARN": "WARNING"}.get(level, level)
    if level not in ("ERROR", "WARNING", "INFO", "DEBUG"):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def run(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "replay":
        try:
            manifest = json.loads(args.manifest.read_text(encoding="utf-8"))
            out = args.out if args.out is not None else args.manifest.parent
            replay_argv = _argv_from_manifest(manifest, out, args.jobs)
        except (OSError, ValueError, KeyError) as exc:
            print(f"ghostfilter: error: unreadable manifest {args.manifest}: {exc}", file=sys.stderr)
            return EXIT_DATA
        return run(replay_argv)

    try:
        out = _Outputs(args.out)
        COMMANDS[args.command](args, out)
        out.write("manifest.json", _manifest(args, out))
    except _UsageError as exc:
        print(f"ghostfilter {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GhostFilterError, OSError) as exc:
        print(f"ghostfilter {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
