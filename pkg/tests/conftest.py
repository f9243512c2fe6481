import pytest

from trajsanitize.trajectory import Dataset, Point, Trajectory

# POIs on a ~330 m grid; all pairs reachable within minutes at walking speed
GRID = {name: (30.0 + 0.003 * (i // 4), -97.0 + 0.003 * (i % 4)) for i, name in enumerate("abcdefghijklmnopqrstuvwxyz")}


def traj(user, locs, index=0, t0=1_000_000, step=600, coords=GRID):
    if isinstance(locs, str):
        locs = list(locs)
    return Trajectory(user, index, tuple(Point(l, t0 + k * step, *coords[l]) for k, l in enumerate(locs)))


def dataset(*trajectories, coords=GRID):
    used = {p.location_id for t in trajectories for p in t.points}
    return Dataset(tuple(trajectories), {k: v for k, v in coords.items() if k in used})


_results = []


@pytest.fixture
def criterion():
    """Record a named acceptance criterion; prints PASS/FAIL in the summary."""

    def check(number, description, ok):
        _results.append((number, description, bool(ok)))
        assert ok, f"criterion {number} failed: {description}"

    return check


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, ok in sorted(_results, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}: {description}")
