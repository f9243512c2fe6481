"""Utility metrics: per-region KL divergence and trajectory similarity."""

from __future__ import annotations

import math
import statistics
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from trajsanitize.candidates import CandidateSet, PatternIndex
from trajsanitize.errors import ConfigError, EmptyDomainError, SupportMismatchError
from trajsanitize.mechanism import (
    FALLBACK,
    ORIGINAL_REGION,
    REPLACED,
    UNIFORM_RANDOM,
    BudgetAllocation,
    ReplacementOutcome,
    kri_distribution,
    select_input,
)
from trajsanitize.regions import SensitiveRegion
from trajsanitize.trajectory import SUPPRESSED, Dataset, Trajectory, haversine

Seq = tuple[str, ...]
SUPPRESSED_SEQ: Seq = (SUPPRESSED,)


@dataclass(frozen=True)
class RegionDistributions:
    """Original (``P``) and published (``Q``) pattern distributions of one region."""

    support: tuple[Seq, ...]
    P: tuple[float, ...]
    Q: tuple[float, ...]


def support_of(cs: CandidateSet, with_suppressed: bool = False) -> list[Seq]:
    support = cs.sequences + [cs.region.sequence]
    if with_suppressed:
        support.append(SUPPRESSED_SEQ)
    return support


def original_distribution(
    region: SensitiveRegion, support: Sequence[Seq], index: PatternIndex
) -> tuple[float, ...]:
    """Add-one smoothed frequency of ``parent -> x -> child`` over ``support``."""
    weights = [
        (0 if x == SUPPRESSED_SEQ else index.count(region.parent_id, region.child_id, x)) + 1 for x in support
    ]
    total = sum(weights)
    return tuple(w / total for w in weights)


def expected_output_distribution(cs: CandidateSet, epsilon: float, strategy: str) -> tuple[float, ...]:
    """Exact output probabilities of the mechanism on ``support_of(cs)``.

    The region's own content is last in the support and always gets 0.
    For uniform-random input selection the distribution is averaged over
    all possible inputs.
    """
    if cs.K == 0:
        raise EmptyDomainError("no candidates; the region is suppressed")
    if strategy == UNIFORM_RANDOM:
        rows = [kri_distribution(cs.K, epsilon, i).probs for i in range(cs.K)]
        q = [math.fsum(col) / cs.K for col in zip(*rows)]
    else:
        inp = None if strategy == ORIGINAL_REGION else select_input(cs, strategy)
        q = list(kri_distribution(cs.K, epsilon, inp).probs)
    return tuple(q) + (0.0,)


def empirical_output_distribution(outcomes: Sequence[ReplacementOutcome], support: Sequence[Seq]) -> tuple[float, ...]:
    """Relative frequency of each support element among ``outcomes``."""
    if not outcomes:
        raise ValueError("need at least one outcome")
    counts = Counter(o.chosen for o in outcomes)
    unknown = set(counts) - set(support)
    if unknown:
        raise SupportMismatchError(f"outcomes outside the support: {sorted(unknown)}")
    return tuple(counts.get(x, 0) / len(outcomes) for x in support)


def region_distributions(
    cs: CandidateSet,
    index: PatternIndex,
    epsilon: float | None,
    strategy: str,
    suppressed: bool = False,
) -> RegionDistributions:
    """Distributions for one region.

    ``suppressed`` (or an empty candidate set) publishes the region as the
    suppression marker, which joins the support with smoothed ``P`` mass.
    """
    if suppressed or cs.K == 0:
        support = support_of(cs, with_suppressed=True)
        q = tuple(0.0 for _ in support[:-1]) + (1.0,)
    else:
        support = support_of(cs)
        q = expected_output_distribution(cs, epsilon, strategy)
    return RegionDistributions(tuple(support), original_distribution(cs.region, support, index), q)


def kl_region(Q, P) -> float:
    """``sum Q log(Q / P)`` in nats, with ``0 log 0 = 0``.

    Accepts two equal-length sequences or two mappings over the same keys.
    """
    if isinstance(Q, Mapping) or isinstance(P, Mapping):
        if not (isinstance(Q, Mapping) and isinstance(P, Mapping)) or set(Q) != set(P):
            raise SupportMismatchError("Q and P have different supports")
        keys = list(P)
        Q, P = [Q[k] for k in keys], [P[k] for k in keys]
    if len(Q) != len(P):
        raise SupportMismatchError(f"support sizes differ: {len(Q)} vs {len(P)}")
    terms = []
    for q, p in zip(Q, P):
        if q == 0:
            continue
        if p <= 0:
            return math.inf
        terms.append(q * math.log(q / p))
    return max(0.0, math.fsum(terms))


def kl_total(values: Sequence[float]) -> float:
    return math.fsum(values)


def traj_sim(a: Trajectory, b: Trajectory) -> float:
    """``(maxDiff - minDiff) / maxDiff`` over position-aligned point distances.

    Pairs are taken over the common prefix; pairs involving a suppressed
    point have no distance and are skipped. Identical positions give 1, no
    measurable pair gives 0.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("trajectories must be non-empty")
    diffs = [
        haversine(p.coords, q.coords)
        for p, q in zip(a.points, b.points)
        if not (p.suppressed or q.suppressed)
    ]
    if not diffs:
        return 0.0
    hi, lo = max(diffs), min(diffs)
    if hi == 0:
        return 1.0
    return (hi - lo) / hi


@dataclass
class UtilityReport:
    params: dict
    regions: list[dict]
    total_dkl: float
    trajsim: dict
    outcome_counts: dict
    seed: int | None = None
    fallback_dkl: float = 0.0
    similarities: list[float] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "params": self.params,
            "regions": self.regions,
            "total_dkl": self.total_dkl,
            "fallback_dkl": self.fallback_dkl,
            "trajsim": self.trajsim,
            "outcome_counts": self.outcome_counts,
            "seed": self.seed,
        }


def evaluate(
    original: Dataset,
    sanitized: Dataset,
    candidate_sets: Mapping[tuple[str, int], Sequence[CandidateSet]],
    allocations: Mapping[tuple[str, int], BudgetAllocation] | None,
    strategy: str,
    index: PatternIndex,
    params: dict | None = None,
    seed: int | None = None,
    empirical_outcomes: Mapping[tuple[str, int, int], Sequence[ReplacementOutcome]] | None = None,
) -> UtilityReport:
    """Assemble the utility report for one sanitization run.

    ``allocations=None`` evaluates the suppression baseline. Per-region Q is
    analytic unless ``empirical_outcomes`` holds repeated outcomes keyed by
    ``(user, trajectory index, region start)``.
    """
    orig_by_key = original.by_key()
    san_by_key = sanitized.by_key()
    if set(orig_by_key) != set(san_by_key):
        raise ConfigError("original and sanitized datasets hold different trajectories")

    rows: list[dict] = []
    dkls: list[float] = []
    fallback: list[float] = []
    counts: Counter[str] = Counter()
    sims: list[float] = []
    for key in sorted(candidate_sets):
        sets = sorted(candidate_sets[key], key=lambda cs: cs.region.start)
        if not sets:
            continue
        for cs in sets:
            r = cs.region
            rid = (*r.traj_key, r.start)
            if allocations is None or cs.K == 0:
                mode = "suppressed" if allocations is None else FALLBACK
                eps = 0.0
                dist = region_distributions(cs, index, None, strategy, suppressed=True)
            else:
                mode = REPLACED
                eps = allocations[key].epsilon_for(r)
                dist = region_distributions(cs, index, eps, strategy)
                if empirical_outcomes is not None and rid in empirical_outcomes:
                    q_hat = empirical_output_distribution(empirical_outcomes[rid], dist.support)
                    dist = RegionDistributions(dist.support, dist.P, q_hat)
            dkl = kl_region(dist.Q, dist.P)
            dkls.append(dkl)
            if mode == FALLBACK:
                fallback.append(dkl)
            counts[mode] += 1
            rows.append({"id": f"{r.traj_key[0]}:{r.traj_key[1]}:{r.start}", "K": cs.K,
                         "epsilon_j": eps, "dkl": dkl, "mode": mode})
        sims.append(traj_sim(orig_by_key[key], san_by_key[key]))

    if sims:
        summary = {"mean": statistics.fmean(sims), "min": min(sims), "max": max(sims), "count": len(sims)}
    else:
        summary = {"mean": 1.0, "min": 1.0, "max": 1.0, "count": 0}
    return UtilityReport(
        params=dict(params or {}),
        regions=rows,
        total_dkl=kl_total(dkls),
        trajsim=summary,
        outcome_counts=dict(sorted(counts.items())),
        seed=seed,
        fallback_dkl=kl_total(fallback),
        similarities=sims,
    )
