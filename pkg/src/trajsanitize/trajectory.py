"""Check-in records, trajectory segmentation and geodesic primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, NamedTuple, TextIO

from trajsanitize.errors import ConfigError, ParseError

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_SESSION_GAP = 21_600
DEFAULT_DELTA_SPEED = 30.0

# Reserved location for a suppressed span; never a real POI.
SUPPRESSED = "⊥"
SUPPRESSED_TOKEN = "SUPPRESSED"

_ISO_FMT = "%Y-%m-%dT%H:%M:%SZ"


@dataclass(frozen=True)
class CheckIn:
    user_id: str
    timestamp: int
    lat: float
    lon: float
    location_id: str

    def __post_init__(self):
        _check_coords(self.lat, self.lon)
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class Point:
    """One visit inside a trajectory. Suppressed points carry NaN coordinates."""

    location_id: str
    timestamp: int
    lat: float
    lon: float

    @property
    def coords(self) -> tuple[float, float]:
        return (self.lat, self.lon)

    @property
    def suppressed(self) -> bool:
        return self.location_id == SUPPRESSED


@dataclass(frozen=True)
class Trajectory:
    user_id: str
    index: int
    points: tuple[Point, ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("trajectory must contain at least one point")
        ts = [p.timestamp for p in self.points]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"timestamps decrease in trajectory {self.key}")

    @property
    def key(self) -> tuple[str, int]:
        return (self.user_id, self.index)

    @property
    def locations(self) -> tuple[str, ...]:
        return tuple(p.location_id for p in self.points)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Dataset:
    trajectories: tuple[Trajectory, ...]
    poi_registry: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def user_count(self) -> int:
        return len({t.user_id for t in self.trajectories})

    def by_key(self) -> dict[tuple[str, int], Trajectory]:
        return {t.key: t for t in self.trajectories}

    def with_trajectories(self, trajectories: Iterable[Trajectory]) -> "Dataset":
        return Dataset(tuple(trajectories), self.poi_registry)


class Diagnostic(NamedTuple):
    line_no: int
    reason: str


def _check_coords(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0):
        raise ValueError(f"latitude {lat} out of range")
    if not (-180.0 <= lon <= 180.0):
        raise ValueError(f"longitude {lon} out of range")


def parse_time(text: str) -> int:
    """ISO-8601 to integer epoch seconds. Naive times are taken as UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    ts = math.floor(dt.timestamp())
    if ts < 0:
        raise ValueError("time before the Unix epoch")
    return ts


def format_time(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime(_ISO_FMT)


def _parse_line(line: str) -> CheckIn:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 5:
        raise ValueError(f"expected 5 tab-separated fields, got {len(fields)}")
    user, when, lat, lon, loc = fields
    if not user or not loc:
        raise ValueError("empty user or location id")
    lat_f, lon_f = float(lat), float(lon)
    if not (math.isfinite(lat_f) and math.isfinite(lon_f)):
        raise ValueError("non-finite coordinate")
    return CheckIn(user, parse_time(when), lat_f, lon_f, loc)


def parse_checkins(stream: Iterable[str], strict: bool = False) -> tuple[list[CheckIn], list[Diagnostic]]:
    """Parse a Gowalla-style TSV stream.

    Each line holds ``user_id, ISO time, latitude, longitude, location_id``.
    Blank lines are ignored. Malformed lines produce a :class:`Diagnostic`
    in lenient mode; in strict mode the first one raises :class:`ParseError`.
    """
    checkins: list[CheckIn] = []
    diagnostics: list[Diagnostic] = []
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            checkins.append(_parse_line(line))
        except ValueError as exc:
            if strict:
                raise ParseError(line_no, str(exc)) from exc
            diagnostics.append(Diagnostic(line_no, str(exc)))
    return checkins, diagnostics


def format_checkin(c: CheckIn) -> str:
    return f"{c.user_id}\t{format_time(c.timestamp)}\t{c.lat!r}\t{c.lon!r}\t{c.location_id}"


def write_checkins(checkins: Iterable[CheckIn], out: TextIO) -> None:
    for c in checkins:
        out.write(format_checkin(c) + "\n")


def segment_trajectories(checkins: Iterable[CheckIn], session_gap: float = DEFAULT_SESSION_GAP) -> Dataset:
    """Group check-ins per user and cut wherever consecutive visits are more than
    ``session_gap`` seconds apart."""
    if session_gap <= 0:
        raise ConfigError("session_gap must be positive")
    per_user: dict[str, list[tuple[int, str, int, CheckIn]]] = {}
    registry: dict[str, tuple[float, float]] = {}
    for order, c in enumerate(checkins):
        per_user.setdefault(c.user_id, []).append((c.timestamp, c.location_id, order, c))
        registry.setdefault(c.location_id, (c.lat, c.lon))

    trajectories: list[Trajectory] = []
    for user in sorted(per_user):
        rows = sorted(per_user[user], key=lambda r: r[:3])
        current: list[Point] = []
        idx = 0
        for ts, loc, _, c in rows:
            if current and ts - current[-1].timestamp > session_gap:
                trajectories.append(Trajectory(user, idx, tuple(current)))
                idx += 1
                current = []
            current.append(Point(loc, ts, c.lat, c.lon))
        trajectories.append(Trajectory(user, idx, tuple(current)))
    return Dataset(tuple(trajectories), registry)


def haversine(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two ``(lat, lon)`` pairs."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def reachable(a: Point, b: Point, delta: float = DEFAULT_DELTA_SPEED) -> bool:
    """Whether ``b`` can be reached from ``a`` without exceeding ``delta`` m/s."""
    if delta <= 0:
        raise ConfigError("delta must be positive")
    dist = haversine(a.coords, b.coords)
    dt = abs(a.timestamp - b.timestamp)
    if dt == 0:
        return dist == 0.0
    return dist <= delta * dt


# -- trajectory TSV --------------------------------------------------------

def _fmt_coord(x: float) -> str:
    return "" if math.isnan(x) else repr(x)


def write_trajectories(trajectories: Iterable[Trajectory], out: TextIO) -> None:
    """One line per point: user, trajectory index, point index, time, lat, lon, location."""
    for t in trajectories:
        for i, p in enumerate(t.points):
            loc = SUPPRESSED_TOKEN if p.suppressed else p.location_id
            out.write(
                f"{t.user_id}\t{t.index}\t{i}\t{format_time(p.timestamp)}\t"
                f"{_fmt_coord(p.lat)}\t{_fmt_coord(p.lon)}\t{loc}\n"
            )


def read_trajectories(stream: Iterable[str]) -> list[Trajectory]:
    rows: dict[tuple[str, int], list[tuple[int, Point]]] = {}
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) != 7:
            raise ParseError(line_no, f"expected 7 fields, got {len(fields)}")
        user, tidx, pidx, when, lat, lon, loc = fields
        try:
            if loc == SUPPRESSED_TOKEN:
                point = Point(SUPPRESSED, parse_time(when), math.nan, math.nan)
            else:
                point = Point(loc, parse_time(when), float(lat), float(lon))
            rows.setdefault((user, int(tidx)), []).append((int(pidx), point))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc
    return [
        Trajectory(user, tidx, tuple(p for _, p in sorted(pts, key=lambda r: r[0])))
        for (user, tidx), pts in rows.items()
    ]
