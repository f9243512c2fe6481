import pytest

from trajsanitize.errors import ConfigError
from trajsanitize.stats import build_stats
from trajsanitize.synthetic import gen_synthetic
from trajsanitize.trajectory import reachable, segment_trajectories


def test_deterministic():
    a = gen_synthetic(20, 25, 3, 0.1, seed=1)
    b = gen_synthetic(20, 25, 3, 0.1, seed=1)
    assert a == b
    assert a != gen_synthetic(20, 25, 3, 0.1, seed=2)


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.2])
def test_sensitive_fraction_bounds(frac):
    with pytest.raises(ConfigError):
        gen_synthetic(5, 9, 1, frac, seed=0)


def test_sizes_match_request():
    users, tpu, length = 25, 4, 7
    corpus = gen_synthetic(users, 49, tpu, 0.1, seed=3, traj_len=length)
    ds = segment_trajectories(corpus.checkins)
    stats = build_stats(ds)
    assert stats.N == users
    assert sum(stats.unigram.values()) == users * tpu * length
    assert len(ds.trajectories) == users * tpu
    assert all(len(t) == length for t in ds.trajectories)


def test_walks_are_reachable_and_sensitive_sets_visited():
    corpus = gen_synthetic(15, 36, 3, 0.1, seed=4)
    ds = segment_trajectories(corpus.checkins)
    for t in ds.trajectories:
        assert all(reachable(a, b, 30.0) for a, b in zip(t.points, t.points[1:]))
    visited = {}
    for t in ds.trajectories:
        visited.setdefault(t.user_id, set()).update(t.locations)
    for user, s in corpus.sensitive.items():
        assert s and s <= visited[user] and s <= set(corpus.sensitive_pois)
