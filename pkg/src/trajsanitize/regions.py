"""Locate sensitive points and grow them into sensitive regions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from trajsanitize.errors import ParseError, UndefinedStatisticsError
from trajsanitize.stats import CorrelationStats, is_strong_next, is_strong_prev
from trajsanitize.trajectory import Dataset, Point, Trajectory

SensitiveSets = Mapping[str, set[str]]


@dataclass(frozen=True)
class SensitiveRegion:
    """An inclusive span ``[start, end]`` of one trajectory that must be replaced.

    ``parent`` and ``child`` are the points just outside the span, or ``None``
    at a trajectory boundary.
    """

    traj_key: tuple[str, int]
    start: int
    end: int
    sequence: tuple[str, ...]
    parent: Point | None
    child: Point | None
    first_ts: int
    last_ts: int
    reasons: tuple[str, ...] = ()

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def parent_id(self) -> str | None:
        return self.parent.location_id if self.parent else None

    @property
    def child_id(self) -> str | None:
        return self.child.location_id if self.child else None

    def to_json(self) -> dict:
        return {
            "trajectory": list(self.traj_key),
            "span": [self.start, self.end],
            "sequence": list(self.sequence),
            "parent": self.parent_id,
            "child": self.child_id,
            "reasons": list(self.reasons),
        }


def _make_region(traj: Trajectory, start: int, end: int, reasons: list[str]) -> SensitiveRegion:
    pts = traj.points
    return SensitiveRegion(
        traj_key=traj.key,
        start=start,
        end=end,
        sequence=tuple(p.location_id for p in pts[start : end + 1]),
        parent=pts[start - 1] if start > 0 else None,
        child=pts[end + 1] if end + 1 < len(pts) else None,
        first_ts=pts[start].timestamp,
        last_ts=pts[end].timestamp,
        reasons=tuple(reasons),
    )


def detect_regions(traj: Trajectory, sensitive: set[str], stats: CorrelationStats) -> list[SensitiveRegion]:
    """Sensitive regions of one trajectory, disjoint and sorted by start.

    Every sensitive index becomes a span that grows by one hop toward a
    neighbor exactly when that neighbor is strongly correlated with it.
    Spans that overlap or touch are merged.
    """
    if stats.N <= 0:
        raise UndefinedStatisticsError("no users in statistics (N = 0)")
    locs = traj.locations
    n = len(locs)
    spans: list[tuple[int, int, list[str]]] = []
    for i, loc in enumerate(locs):
        if loc not in sensitive:
            continue
        lo, hi = i, i
        reasons = [f"sensitive@{i}"]
        if i > 0 and is_strong_prev(stats, locs[i - 1], loc):
            lo = i - 1
            reasons.append(f"strong-prev@{i - 1}")
        if i + 1 < n and is_strong_next(stats, loc, locs[i + 1]):
            hi = i + 1
            reasons.append(f"strong-next@{i + 1}")
        spans.append((lo, hi, reasons))

    merged: list[tuple[int, int, list[str]]] = []
    for lo, hi, reasons in sorted(spans, key=lambda s: s[0]):
        if merged and lo <= merged[-1][1] + 1:
            plo, phi, preasons = merged[-1]
            merged[-1] = (plo, max(phi, hi), preasons + reasons)
        else:
            merged.append((lo, hi, reasons))
    return [_make_region(traj, lo, hi, reasons) for lo, hi, reasons in merged]


def detect_all(
    dataset: Dataset, sensitive_sets: SensitiveSets, stats: CorrelationStats
) -> dict[tuple[str, int], list[SensitiveRegion]]:
    """Regions for every trajectory that has any. Keys are trajectory keys."""
    out: dict[tuple[str, int], list[SensitiveRegion]] = {}
    for traj in dataset.trajectories:
        s = sensitive_sets.get(traj.user_id)
        if not s:
            continue
        regions = detect_regions(traj, s, stats)
        if regions:
            out[traj.key] = regions
    return out


def read_sensitive_sets(stream: Iterable[str]) -> dict[str, set[str]]:
    """Parse ``user_id<TAB>location_id`` lines."""
    sets: dict[str, set[str]] = {}
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) != 2 or not all(fields):
            raise ParseError(line_no, "expected user_id<TAB>location_id")
        sets.setdefault(fields[0], set()).add(fields[1])
    return sets


def regions_from_audit(audit: list[dict], dataset: Dataset) -> dict[tuple[str, int], list[SensitiveRegion]]:
    """Rebuild regions from a region audit dump against the same dataset."""
    by_key = dataset.by_key()
    out: dict[tuple[str, int], list[SensitiveRegion]] = {}
    for entry in audit:
        key = (str(entry["trajectory"][0]), int(entry["trajectory"][1]))
        start, end = entry["span"]
        region = _make_region(by_key[key], int(start), int(end), list(entry.get("reasons", [])))
        if list(region.sequence) != list(entry["sequence"]):
            raise ValueError(f"audit entry does not match trajectory {key}")
        out.setdefault(key, []).append(region)
    for regions in out.values():
        regions.sort(key=lambda r: r.start)
    return out
