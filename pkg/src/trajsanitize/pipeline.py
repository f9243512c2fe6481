"""End-to-end orchestration: stats, regions, candidates, replacement, evaluation."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

from trajsanitize.candidates import CandidateSet, PatternIndex, build_pattern_index, candidates_for
from trajsanitize.errors import ConfigError
from trajsanitize.evaluation import UtilityReport, evaluate
from trajsanitize.mechanism import (
    MOST_FREQUENT,
    STRATEGIES,
    BudgetAllocation,
    ReplacementOutcome,
    allocate,
    baseline_suppress,
    sanitize,
    trajectory_rng,
)
from trajsanitize.regions import SensitiveRegion, SensitiveSets, detect_all
from trajsanitize.stats import DEFAULT_GUESS_FLOOR, CorrelationStats, build_stats
from trajsanitize.trajectory import DEFAULT_DELTA_SPEED, DEFAULT_SESSION_GAP, Dataset

ALLOCATORS = ("br", "ratio")
BASELINE = "baseline"


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 1.0
    delta_speed: float = DEFAULT_DELTA_SPEED
    session_gap: float = DEFAULT_SESSION_GAP
    allocator: str = "br"
    strategy: str = MOST_FREQUENT
    guess_floor: float = DEFAULT_GUESS_FLOOR
    seed: int = 0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError("epsilon must be a positive finite number")
        if not self.delta_speed > 0:
            raise ConfigError("delta speed must be positive")
        if not self.session_gap > 0:
            raise ConfigError("session gap must be positive")
        if self.allocator not in ALLOCATORS:
            raise ConfigError(f"allocator must be one of {ALLOCATORS}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if not 0 <= self.guess_floor <= 1:
            raise ConfigError("guess floor must lie in [0, 1]")

    def params(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta_speed": self.delta_speed,
            "session_gap": self.session_gap,
            "allocator": self.allocator,
            "strategy": self.strategy,
            "guess_floor": self.guess_floor,
        }


@dataclass
class Plan:
    """Everything that does not depend on the privacy budget or the seed."""

    dataset: Dataset
    sensitive_sets: SensitiveSets
    stats: CorrelationStats
    regions: dict[tuple[str, int], list[SensitiveRegion]]
    index: PatternIndex
    candidate_sets: dict[tuple[str, int], list[CandidateSet]]


def prepare(
    dataset: Dataset,
    sensitive_sets: SensitiveSets,
    config: RunConfig,
    stats: CorrelationStats | None = None,
    regions: dict[tuple[str, int], list[SensitiveRegion]] | None = None,
) -> Plan:
    if stats is None:
        stats = build_stats(dataset, config.guess_floor)
    if regions is None:
        regions = detect_all(dataset, sensitive_sets, stats) if dataset.trajectories else {}
    max_len = max((r.length for rs in regions.values() for r in rs), default=1)
    index = build_pattern_index(dataset, max_len)
    candidate_sets = {
        key: [
            candidates_for(r, index, stats, sensitive_sets.get(key[0], set()), config.delta_speed)
            for r in rs
        ]
        for key, rs in regions.items()
    }
    return Plan(dataset, sensitive_sets, stats, regions, index, candidate_sets)


@dataclass
class RunResult:
    sanitized: Dataset
    outcomes: dict[tuple[str, int], list[ReplacementOutcome]]
    allocations: dict[tuple[str, int], BudgetAllocation] | None
    report: UtilityReport


def allocations_for(plan: Plan, epsilon: float, allocator: str) -> dict[tuple[str, int], BudgetAllocation]:
    # budget is spent per trajectory
    return {key: allocate(allocator, epsilon, sets) for key, sets in plan.candidate_sets.items()}


def run(plan: Plan, config: RunConfig) -> RunResult:
    allocations = allocations_for(plan, config.epsilon, config.allocator)
    outcomes: dict[tuple[str, int], list[ReplacementOutcome]] = {}
    out = []
    for traj in plan.dataset.trajectories:
        regions = plan.regions.get(traj.key)
        if not regions:
            out.append(traj)
            continue
        new, outs = sanitize(
            traj, regions, plan.candidate_sets[traj.key], allocations[traj.key],
            config.strategy, trajectory_rng(config.seed, traj.key),
        )
        out.append(new)
        outcomes[traj.key] = outs
    sanitized = plan.dataset.with_trajectories(out)
    report = evaluate(plan.dataset, sanitized, plan.candidate_sets, allocations, config.strategy,
                      plan.index, params=config.params(), seed=config.seed)
    return RunResult(sanitized, outcomes, allocations, report)


def run_baseline(plan: Plan, config: RunConfig) -> RunResult:
    out = [baseline_suppress(t, plan.regions[t.key]) if t.key in plan.regions else t
           for t in plan.dataset.trajectories]
    sanitized = plan.dataset.with_trajectories(out)
    params = {**config.params(), "allocator": BASELINE}
    report = evaluate(plan.dataset, sanitized, plan.candidate_sets, None, config.strategy,
                      plan.index, params=params, seed=config.seed)
    return RunResult(sanitized, {}, None, report)


@dataclass
class SweepRow:
    epsilon: float
    allocator: str
    dkl: list[float] = field(default_factory=list)
    trajsim: list[float] = field(default_factory=list)

    @property
    def mean_dkl(self) -> float:
        return statistics.fmean(self.dkl)

    @property
    def mean_trajsim(self) -> float:
        return statistics.fmean(self.trajsim)

    @property
    def se_trajsim(self) -> float:
        if len(self.trajsim) < 2:
            return 0.0
        return statistics.stdev(self.trajsim) / math.sqrt(len(self.trajsim))


def sweep(plan: Plan, config: RunConfig, epsilons, trials: int) -> list[SweepRow]:
    """Repeat sanitization ``trials`` times per budget and allocator, plus the baseline.

    Trial ``t`` uses seed ``config.seed + t``. Rows are sorted by (epsilon, allocator).
    """
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    rows: list[SweepRow] = []
    for eps in sorted(set(epsilons)):
        for allocator in sorted(ALLOCATORS + (BASELINE,)):
            row = SweepRow(eps, allocator)
            for t in range(trials):
                cfg = RunConfig(
                    epsilon=eps, delta_speed=config.delta_speed, session_gap=config.session_gap,
                    allocator=config.allocator if allocator == BASELINE else allocator,
                    strategy=config.strategy, guess_floor=config.guess_floor, seed=config.seed + t,
                )
                res = run_baseline(plan, cfg) if allocator == BASELINE else run(plan, cfg)
                row.dkl.append(res.report.total_dkl)
                row.trajsim.append(res.report.trajsim["mean"])
            rows.append(row)
    return rows
