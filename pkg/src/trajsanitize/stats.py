"""Global visit counts and the attacker-inference probabilities built on them."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import TextIO

from trajsanitize.errors import UndefinedStatisticsError
from trajsanitize.trajectory import Dataset

DEFAULT_GUESS_FLOOR = 0.5


@dataclass(frozen=True)
class CorrelationStats:
    """Dataset-wide counts.

    Attributes:
        N: number of distinct users.
        users_at: distinct users that visited each location.
        unigram: total occurrences of each location as a trajectory point.
        bigram: occurrences of each ordered consecutive pair.
        guess_floor: lower bound on the attacker's unconditioned guess.
    """

    N: int
    users_at: dict[str, int] = field(default_factory=dict)
    unigram: dict[str, int] = field(default_factory=dict)
    bigram: dict[tuple[str, str], int] = field(default_factory=dict)
    guess_floor: float = DEFAULT_GUESS_FLOOR

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "guess_floor": self.guess_floor,
            "users_at": dict(sorted(self.users_at.items())),
            "unigram": dict(sorted(self.unigram.items())),
            "bigram": [[a, b, n] for (a, b), n in sorted(self.bigram.items())],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorrelationStats":
        return cls(
            N=int(obj["N"]),
            users_at={k: int(v) for k, v in obj["users_at"].items()},
            unigram={k: int(v) for k, v in obj["unigram"].items()},
            bigram={(a, b): int(n) for a, b, n in obj["bigram"]},
            guess_floor=float(obj.get("guess_floor", DEFAULT_GUESS_FLOOR)),
        )

    def dump(self, out: TextIO) -> None:
        json.dump(self.to_json(), out, indent=1, ensure_ascii=False)
        out.write("\n")


def build_stats(dataset: Dataset, guess_floor: float = DEFAULT_GUESS_FLOOR) -> CorrelationStats:
    visitors: dict[str, set[str]] = {}
    unigram: Counter[str] = Counter()
    bigram: Counter[tuple[str, str]] = Counter()
    for traj in dataset.trajectories:
        locs = traj.locations
        unigram.update(locs)
        bigram.update(zip(locs, locs[1:]))
        for loc in locs:
            visitors.setdefault(loc, set()).add(traj.user_id)
    return CorrelationStats(
        N=dataset.user_count,
        users_at={loc: len(users) for loc, users in visitors.items()},
        unigram=dict(unigram),
        bigram=dict(bigram),
        guess_floor=guess_floor,
    )


def guess_prob(stats: CorrelationStats, loc: str) -> float:
    """Attacker's context-free guess: ``max(floor, users_at(loc) / N)``."""
    if stats.N <= 0:
        raise UndefinedStatisticsError("no users in statistics (N = 0)")
    return max(stats.guess_floor, stats.users_at.get(loc, 0) / stats.N)


def cond_prob_prev(stats: CorrelationStats, prev: str, loc: str) -> float:
    denom = stats.unigram.get(prev, 0)
    if denom == 0:
        return 0.0
    return stats.bigram.get((prev, loc), 0) / denom


def cond_prob_next(stats: CorrelationStats, loc: str, next_: str) -> float:
    # conditioned on the successor: c(loc, next) / c(next)
    denom = stats.unigram.get(next_, 0)
    if denom == 0:
        return 0.0
    return stats.bigram.get((loc, next_), 0) / denom


def is_strong_prev(stats: CorrelationStats, prev: str, loc: str) -> bool:
    return cond_prob_prev(stats, prev, loc) > guess_prob(stats, loc)


def is_strong_next(stats: CorrelationStats, loc: str, next_: str) -> bool:
    return cond_prob_next(stats, loc, next_) > guess_prob(stats, loc)
