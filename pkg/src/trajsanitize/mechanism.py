"""k-ary randomized response over candidate sets, budget allocation and replacement."""

from __future__ import annotations

import bisect
import hashlib
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from trajsanitize.candidates import CandidateSet
from trajsanitize.errors import ConfigError, EmptyDomainError
from trajsanitize.regions import SensitiveRegion
from trajsanitize.trajectory import SUPPRESSED, Point, Trajectory

ORIGINAL_REGION = "original-region"
MOST_FREQUENT = "most-frequent"
UNIFORM_RANDOM = "uniform-random"
STRATEGIES = (ORIGINAL_REGION, MOST_FREQUENT, UNIFORM_RANDOM)

REPLACED = "replaced"
FALLBACK = "suppressed-fallback"


@dataclass(frozen=True)
class KriDistribution:
    K: int
    epsilon: float
    input_index: int | None
    probs: tuple[float, ...]


def kri_distribution(K: int, epsilon: float, input_index: int | None = None) -> KriDistribution:
    """Output distribution of k-ary randomized response.

    With no input (the true value lies outside the output domain) every
    output is equally likely. Otherwise the input is reported with
    probability ``e^eps / (K - 1 + e^eps)`` and each other output with
    ``1 / (K - 1 + e^eps)``.
    """
    if K < 1:
        raise EmptyDomainError("randomized response needs at least one output")
    if epsilon < 0:
        raise ConfigError("epsilon must be non-negative")
    if input_index is None:
        return KriDistribution(K, epsilon, None, (1.0 / K,) * K)
    if not 0 <= input_index < K:
        raise ConfigError(f"input index {input_index} outside [0, {K})")
    e = math.exp(epsilon)
    denom = K - 1 + e
    probs = [1.0 / denom] * K
    probs[input_index] = e / denom
    return KriDistribution(K, epsilon, input_index, tuple(probs))


def kri_sample(dist: KriDistribution, rng: np.random.Generator) -> int:
    """Draw one output index by inverting the cumulative distribution."""
    if dist.K == 1:
        return 0
    cdf = list(itertools.accumulate(dist.probs))
    return min(bisect.bisect_right(cdf, rng.random()), dist.K - 1)


def trajectory_rng(seed: int, traj_key: tuple[str, int]) -> np.random.Generator:
    """Independent stream per trajectory, derived from the master seed."""
    digest = hashlib.sha256(f"{traj_key[0]}\0{traj_key[1]}".encode()).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *words]))


# -- budget allocation ------------------------------------------------------

def region_id(region: SensitiveRegion) -> tuple[str, int, int]:
    return (*region.traj_key, region.start)


@dataclass(frozen=True)
class BudgetAllocation:
    total_epsilon: float
    per_region: tuple[tuple[SensitiveRegion, float], ...]
    scheme: str

    def epsilon_for(self, region: SensitiveRegion) -> float:
        for r, eps in self.per_region:
            if region_id(r) == region_id(region):
                return eps
        raise ConfigError(f"no budget allocated to region {region_id(region)}")

    def __contains__(self, region: SensitiveRegion) -> bool:
        return any(region_id(r) == region_id(region) for r, _ in self.per_region)


def allocate_br(total_epsilon: float, regions: Sequence[SensitiveRegion]) -> BudgetAllocation:
    """Equal split of the budget over the regions."""
    if total_epsilon < 0:
        raise ConfigError("epsilon must be non-negative")
    n = len(regions)
    return BudgetAllocation(total_epsilon, tuple((r, total_epsilon / n) for r in regions), "br")


def allocate_ratio(total_epsilon: float, candidate_sets: Sequence[CandidateSet]) -> BudgetAllocation:
    """Split proportional to candidate-set size. Empty sets get nothing and fall back."""
    if total_epsilon < 0:
        raise ConfigError("epsilon must be non-negative")
    usable = [cs for cs in candidate_sets if cs.K > 0]
    size_sum = sum(cs.K for cs in usable)
    return BudgetAllocation(
        total_epsilon,
        tuple((cs.region, total_epsilon * cs.K / size_sum) for cs in usable),
        "ratio",
    )


def allocate(scheme: str, total_epsilon: float, candidate_sets: Sequence[CandidateSet]) -> BudgetAllocation:
    """Allocate over the regions that have candidates, by scheme name."""
    if scheme == "br":
        return allocate_br(total_epsilon, [cs.region for cs in candidate_sets if cs.K > 0])
    if scheme == "ratio":
        return allocate_ratio(total_epsilon, candidate_sets)
    raise ConfigError(f"unknown allocator {scheme!r}")


# -- replacement ------------------------------------------------------------

def select_input(cs: CandidateSet, strategy: str, rng: np.random.Generator | None = None) -> int | None:
    if cs.K < 1:
        raise EmptyDomainError("cannot select an input from an empty candidate set")
    if strategy == ORIGINAL_REGION:
        return None
    if strategy == MOST_FREQUENT:
        best = max(c.count for c in cs.candidates)
        return min(
            (i for i, c in enumerate(cs.candidates) if c.count == best),
            key=lambda i: cs.candidates[i].sequence,
        )
    if strategy == UNIFORM_RANDOM:
        if rng is None:
            raise ConfigError("uniform-random input selection needs an rng")
        return int(rng.integers(cs.K))
    raise ConfigError(f"unknown strategy {strategy!r}")


@dataclass(frozen=True)
class ReplacementOutcome:
    region: SensitiveRegion
    mode: str
    chosen: tuple[str, ...]
    epsilon: float
    strategy: str
    input_index: int | None = None
    chosen_index: int | None = None
    K: int = 0


def _suppressed_point(region: SensitiveRegion) -> Point:
    return Point(SUPPRESSED, region.first_ts, math.nan, math.nan)


def sanitize(
    traj: Trajectory,
    regions: Sequence[SensitiveRegion],
    candidate_sets: Sequence[CandidateSet],
    allocation: BudgetAllocation,
    strategy: str,
    rng: np.random.Generator,
) -> tuple[Trajectory, list[ReplacementOutcome]]:
    """Replace each region of ``traj`` with a randomized-response draw from its candidates.

    Regions without candidates are suppressed. Outcomes come back in region order.
    """
    if len(regions) != len(candidate_sets):
        raise ConfigError("one candidate set per region is required")
    for r, cs in zip(regions, candidate_sets):
        if region_id(r) != region_id(cs.region):
            raise ConfigError("candidate sets are not aligned with regions")
        if r.traj_key != traj.key:
            raise ConfigError(f"region belongs to {r.traj_key}, not {traj.key}")
    if any(a.end >= b.start for a, b in zip(regions, regions[1:])):
        raise ConfigError("regions must be disjoint and sorted")

    # draws happen left to right so the stream does not depend on splice order
    outcomes: list[ReplacementOutcome] = []
    for region, cs in zip(regions, candidate_sets):
        if cs.K == 0:
            outcomes.append(ReplacementOutcome(region, FALLBACK, (SUPPRESSED,), 0.0, strategy))
            continue
        eps = allocation.epsilon_for(region)
        inp = select_input(cs, strategy, rng)
        idx = kri_sample(kri_distribution(cs.K, eps, inp), rng)
        outcomes.append(
            ReplacementOutcome(region, REPLACED, cs.candidates[idx].sequence, eps, strategy, inp, idx, cs.K)
        )

    points = list(traj.points)
    for out, cs in reversed(list(zip(outcomes, candidate_sets))):
        r = out.region
        new = [_suppressed_point(r)] if out.mode == FALLBACK else list(cs.candidates[out.chosen_index].points)
        points[r.start : r.end + 1] = new
    return Trajectory(traj.user_id, traj.index, tuple(points)), outcomes


def baseline_suppress(traj: Trajectory, regions: Sequence[SensitiveRegion]) -> Trajectory:
    """Publish each region as a single suppression marker."""
    points = list(traj.points)
    for r in sorted(regions, key=lambda r: r.start, reverse=True):
        points[r.start : r.end + 1] = [_suppressed_point(r)]
    return Trajectory(traj.user_id, traj.index, tuple(points))
