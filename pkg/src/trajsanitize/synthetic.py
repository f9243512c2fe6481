"""Synthetic check-in corpora over a POI grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from trajsanitize.errors import ConfigError
from trajsanitize.trajectory import CheckIn

ORIGIN = (30.25, -97.75)
CELL_DEG = 0.004  # ~445 m of latitude
DAY = 86_400
START_TS = 1_286_000_000


@dataclass(frozen=True)
class SyntheticCorpus:
    checkins: list[CheckIn]
    sensitive: dict[str, set[str]]
    sensitive_pois: tuple[str, ...]


def _poi_id(i: int) -> str:
    return f"L{i:04d}"


def gen_synthetic(
    users: int,
    pois: int,
    traj_per_user: int,
    sensitive_fraction: float,
    seed: int,
    traj_len: int = 10,
    radius: int = 2,
    skew: float = 1.0,
    habit_prob: float = 0.7,
    home_pull: float = 0.5,
) -> SyntheticCorpus:
    """Random walks over a square POI grid.

    Each POI has fixed Dirichlet-distributed transition weights toward grid
    neighbors within Chebyshev ``radius`` (smaller ``skew`` flattens them),
    scaled per user by ``exp(-home_pull * distance_to_home)``. Some
    predecessors of sensitive POIs lead to them with probability
    ``habit_prob``, which makes those pairs strongly correlated.
    Trajectories are two days apart and hops last 10 to 60 minutes, so the
    default session gap recovers exactly ``users * traj_per_user``
    trajectories of ``traj_len`` points.
    """
    if min(users, pois, traj_per_user, traj_len) < 1:
        raise ConfigError("users, pois, traj_per_user and traj_len must be positive")
    if not 0 < sensitive_fraction < 1:
        raise ConfigError("sensitive_fraction must lie strictly between 0 and 1")
    if pois < 2:
        raise ConfigError("need at least two POIs")
    rng = np.random.default_rng(seed)
    side = math.ceil(math.sqrt(pois))
    cells = [(i // side, i % side) for i in range(pois)]
    coords = [(round(ORIGIN[0] + r * CELL_DEG, 6), round(ORIGIN[1] + c * CELL_DEG, 6)) for r, c in cells]

    neighbors: list[np.ndarray] = []
    for i, (r, c) in enumerate(cells):
        nb = [j for j, (r2, c2) in enumerate(cells) if j != i and max(abs(r - r2), abs(c - c2)) <= radius]
        if not nb:
            nb = [j for j in range(pois) if j != i]
        neighbors.append(np.array(nb))
    alpha = 1.0 / max(skew, 1e-6)
    weights = [rng.dirichlet(np.full(len(nb), alpha)) for nb in neighbors]

    n_sensitive = max(1, round(sensitive_fraction * pois))
    sensitive_idx = sorted(rng.choice(pois, size=n_sensitive, replace=False).tolist())
    habits: dict[int, int] = {}
    for s in sensitive_idx:
        preds = [j for j in range(pois) if s in neighbors[j] and j not in sensitive_idx and j not in habits]
        if preds:
            habits[int(rng.choice(preds))] = s

    dist = np.array([[max(abs(a[0] - b[0]), abs(a[1] - b[1])) for b in cells] for a in cells], dtype=float)

    checkins: list[CheckIn] = []
    visited: dict[str, set[int]] = {}
    for u in range(users):
        user = f"u{u:05d}"
        home = int(rng.integers(pois))
        pull = [np.exp(-home_pull * dist[home, nb]) for nb in neighbors]
        seen: set[int] = set()
        for t in range(traj_per_user):
            ts = START_TS + u * 7 + t * 2 * DAY + int(rng.integers(0, 6 * 3600))
            near = np.flatnonzero(dist[home] <= 1)
            cur = int(rng.choice(near))
            for step in range(traj_len):
                if step:
                    ts += int(rng.integers(600, 3601))
                    if cur in habits and rng.random() < habit_prob:
                        cur = habits[cur]
                    else:
                        w = weights[cur] * pull[cur]
                        cur = int(rng.choice(neighbors[cur], p=w / w.sum()))
                seen.add(cur)
                lat, lon = coords[cur]
                checkins.append(CheckIn(user, ts, lat, lon, _poi_id(cur)))
        visited[user] = seen

    sensitive_ids = tuple(_poi_id(s) for s in sensitive_idx)
    sensitive = {
        user: {_poi_id(s) for s in sensitive_idx if s in seen}
        for user, seen in visited.items()
    }
    return SyntheticCorpus(checkins, {u: s for u, s in sensitive.items() if s}, sensitive_ids)


def write_sensitive(sensitive: dict[str, set[str]], out) -> None:
    for user in sorted(sensitive):
        for loc in sorted(sensitive[user]):
            out.write(f"{user}\t{loc}\n")
