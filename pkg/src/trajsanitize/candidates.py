"""Anchored subsequence index and candidate replacement sets."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from trajsanitize.errors import ConfigError
from trajsanitize.regions import SensitiveRegion
from trajsanitize.stats import CorrelationStats, is_strong_next, is_strong_prev
from trajsanitize.trajectory import DEFAULT_DELTA_SPEED, Dataset, Point, reachable

Key = tuple[str | None, str | None, int]


@dataclass(frozen=True)
class PatternIndex:
    """Counts of every window ``parent -> seq -> child`` with ``len(seq) <= max_len``.

    Keys are ``(parent, child, m)``. Besides the two-sided keys, one-sided keys
    with ``None`` in place of the missing anchor count every window that
    immediately follows a parent (or precedes a child), whatever lies on the
    other side.
    """

    entries: dict[Key, dict[tuple[str, ...], int]]
    registry: dict[str, tuple[float, float]]
    max_len: int

    def lookup(self, parent: str | None, child: str | None, m: int) -> dict[tuple[str, ...], int]:
        return self.entries.get((parent, child, m), {})

    def count(self, parent: str | None, child: str | None, seq: tuple[str, ...]) -> int:
        return self.lookup(parent, child, len(seq)).get(tuple(seq), 0)


def build_pattern_index(dataset: Dataset, max_len: int) -> PatternIndex:
    if max_len < 1:
        raise ConfigError("max_len must be at least 1")
    entries: dict[Key, dict[tuple[str, ...], int]] = defaultdict(lambda: defaultdict(int))
    for traj in dataset.trajectories:
        locs = traj.locations
        n = len(locs)
        for i in range(n):
            parent = locs[i - 1] if i > 0 else None
            for m in range(1, min(max_len, n - i) + 1):
                seq = locs[i : i + m]
                child = locs[i + m] if i + m < n else None
                if parent is not None:
                    entries[(parent, None, m)][seq] += 1
                if child is not None:
                    entries[(None, child, m)][seq] += 1
                if parent is not None and child is not None:
                    entries[(parent, child, m)][seq] += 1
    frozen = {k: dict(v) for k, v in entries.items()}
    return PatternIndex(frozen, dict(dataset.poi_registry), max_len)


@dataclass(frozen=True)
class Candidate:
    sequence: tuple[str, ...]
    count: int
    points: tuple[Point, ...]


@dataclass(frozen=True)
class CandidateSet:
    region: SensitiveRegion
    candidates: tuple[Candidate, ...]

    @property
    def K(self) -> int:
        return len(self.candidates)

    @property
    def sequences(self) -> list[tuple[str, ...]]:
        return [c.sequence for c in self.candidates]

    def to_json(self) -> dict:
        return {
            "region": self.region.to_json(),
            "K": self.K,
            "candidates": [{"sequence": list(c.sequence), "count": c.count} for c in self.candidates],
        }


def interpolate_times(region: SensitiveRegion, m: int) -> list[int]:
    """Integer timestamps for ``m`` replacement points.

    Between two anchors the points sit at fractions ``k/(m+1)`` of the gap.
    With only a parent they spread up to the region's last timestamp; with only
    a child they start at the region's first timestamp.
    """
    if region.parent is not None and region.child is not None:
        t0, t1 = region.parent.timestamp, region.child.timestamp
        return [t0 + (t1 - t0) * k // (m + 1) for k in range(1, m + 1)]
    if region.parent is not None:
        t0, t1 = region.parent.timestamp, region.last_ts
        return [t0 + (t1 - t0) * k // m for k in range(1, m + 1)]
    if region.child is not None:
        t0, t1 = region.first_ts, region.child.timestamp
        return [t0 + (t1 - t0) * k // m for k in range(m)]
    return [region.first_ts] * m


def candidate_points(region: SensitiveRegion, seq: tuple[str, ...], registry: dict[str, tuple[float, float]]) -> tuple[Point, ...]:
    times = interpolate_times(region, len(seq))
    return tuple(Point(loc, t, *registry[loc]) for loc, t in zip(seq, times))


def _chain_reachable(region: SensitiveRegion, points: tuple[Point, ...], delta: float) -> bool:
    chain = ([region.parent] if region.parent else []) + list(points) + ([region.child] if region.child else [])
    return all(reachable(a, b, delta) for a, b in zip(chain, chain[1:]))


def candidates_for(
    region: SensitiveRegion,
    index: PatternIndex,
    stats: CorrelationStats,
    sensitive: set[str],
    delta: float = DEFAULT_DELTA_SPEED,
) -> CandidateSet:
    """Replacement candidates for ``region``.

    A sequence qualifies when it appears between the region's anchors with
    length at most the region's, contains no sensitive location, is not
    strongly correlated with either anchor, stays reachable at speed
    ``delta`` under interpolated timestamps, and differs from the region's own
    content. Regions without any anchor get an empty set.
    """
    parent, child = region.parent_id, region.child_id
    if parent is None and child is None:
        return CandidateSet(region, ())
    if region.length > index.max_len:
        raise ConfigError(f"index max_len {index.max_len} shorter than region length {region.length}")
    found: list[Candidate] = []
    for m in range(1, region.length + 1):
        for seq, count in index.lookup(parent, child, m).items():
            if seq == region.sequence:
                continue
            if any(loc in sensitive for loc in seq):
                continue
            if parent is not None and is_strong_prev(stats, parent, seq[0]):
                continue
            if child is not None and is_strong_next(stats, seq[-1], child):
                continue
            points = candidate_points(region, seq, index.registry)
            if not _chain_reachable(region, points, delta):
                continue
            found.append(Candidate(seq, count, points))
    found.sort(key=lambda c: c.sequence)
    return CandidateSet(region, tuple(found))
