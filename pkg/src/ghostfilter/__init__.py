"""Ghost-flight detection and filtering for paired planned/executed trajectory data."""

__version__ = "0.1.0"

from .conflict import ConflictPair, ConflictParams, cumulative_by_separation, detect_conflicts, detect_conflicts_bruteforce
from .ddr_io import MatchReport, match_datasets, parse_segment_file, write_segment_file
from .ghost_filter import (
    DeviationRecord,
    Estimator,
    SweepPoint,
    ThresholdEstimate,
    compute_deviations,
    density_at,
    estimate_threshold,
    filter_at,
    kept_crossings,
    filtered_conflict_report,
    sweep,
)
from .segment_model import Crossing, Kind, Phase, Segment, TrajectoryDataset, derive_crossings
from .synth import GroundTruth, SynthConfig, generate
