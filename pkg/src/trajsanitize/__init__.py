"""Sanitize check-in trajectories by replacing sensitive regions under local differential privacy."""

from trajsanitize.candidates import CandidateSet, PatternIndex, build_pattern_index, candidates_for
from trajsanitize.evaluation import UtilityReport, evaluate, kl_region, kl_total, traj_sim
from trajsanitize.mechanism import (
    KriDistribution,
    allocate_br,
    allocate_ratio,
    baseline_suppress,
    kri_distribution,
    kri_sample,
    sanitize,
    select_input,
)
from trajsanitize.regions import SensitiveRegion, detect_all, detect_regions
from trajsanitize.stats import CorrelationStats, build_stats
from trajsanitize.trajectory import (
    CheckIn,
    Dataset,
    Point,
    Trajectory,
    haversine,
    parse_checkins,
    reachable,
    segment_trajectories,
)

__version__ = "0.1.0"
