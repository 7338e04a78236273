"""Trajectory model, ingestion and the time-value / centroid computations."""

import csv
import io
from dataclasses import dataclass, replace
from datetime import timezone
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from dateutil import parser as dateparser

from config.app_logging import logger
from src.errors import RecordParseError, TrajectoryValidationError
from utils.file_io import format_number
from utils.geometry import BoundingBox, PlanarPoint, make_point
from utils.projection import Origin, centroid_origin, check_latlon, project, unproject

Timestamp = Union[int, str]


@dataclass(frozen=True)
class TrackPoint:
    t: int                # epoch seconds
    p: PlanarPoint
    tv: int = 0           # seconds until the next fix; 0 for the last one

    @property
    def x(self) -> float:
        return self.p.x

    @property
    def y(self) -> float:
        return self.p.y


@dataclass(frozen=True)
class Trajectory:
    points: Tuple[TrackPoint, ...]
    origin: Origin

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[TrackPoint]:
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @classmethod
    def from_planar(cls, samples: Iterable[Tuple[int, float, float]], origin: Origin = Origin(0.0, 0.0)) -> "Trajectory":
        """Build a trajectory from ``(t, x, y)`` samples already in the local frame."""
        points = tuple(TrackPoint(int(t), make_point(x, y)) for t, x, y in samples)
        _check_timestamps([pt.t for pt in points])
        return compute_time_values(cls(points, origin))


def _check_timestamps(times: Sequence[int]) -> None:
    duplicates = [i for i in range(1, len(times)) if times[i] == times[i - 1]]
    if duplicates:
        raise TrajectoryValidationError(
            f"duplicate timestamps at indices {duplicates}", indices=duplicates)
    backwards = [i for i in range(1, len(times)) if times[i] < times[i - 1]]
    if backwards:
        raise TrajectoryValidationError(
            f"timestamps not increasing at indices {backwards}", indices=backwards)


def parse_timestamp(value: Timestamp, line_number: Optional[int] = None) -> int:
    """Integer epoch seconds, or an ISO-8601 string (naive values are UTC)."""
    if isinstance(value, int):
        return value
    text = str(value).strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        stamp = dateparser.isoparse(text)
    except (ValueError, OverflowError):
        raise RecordParseError(f"unparseable timestamp {text!r}", line_number=line_number) from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return int(stamp.timestamp())


def compute_time_values(traj: Trajectory) -> Trajectory:
    pts = traj.points
    updated = tuple(
        replace(pt, tv=(pts[i + 1].t - pt.t) if i + 1 < len(pts) else 0)
        for i, pt in enumerate(pts)
    )
    return replace(traj, points=updated)


def ingest(records: Sequence[Tuple[Timestamp, float, float]], origin: Optional[Origin] = None) -> Trajectory:
    """Validate, project and time-value ``(timestamp, lat, lon)`` records.

    Unordered input is rejected, never re-sorted.
    """
    if len(records) == 0:
        raise TrajectoryValidationError("a trajectory needs at least one record", indices=[])

    times = []
    for i, (stamp, lat, lon) in enumerate(records):
        times.append(parse_timestamp(stamp))
        check_latlon(lat, lon, i)
    _check_timestamps(times)

    if origin is None:
        origin = centroid_origin((lat, lon) for _, lat, lon in records)

    points = tuple(
        TrackPoint(t, project(lat, lon, origin, i))
        for i, (t, (_, lat, lon)) in enumerate(zip(times, records))
    )
    logger.info(f"Ingested {len(points)} fixes (origin {origin.lat:.6f}, {origin.lon:.6f})")
    return compute_time_values(Trajectory(points, origin))


def centroid(points: Sequence[TrackPoint]) -> PlanarPoint:
    if len(points) == 0:
        raise TrajectoryValidationError("centroid of zero points", indices=[])
    n = len(points)
    return PlanarPoint(sum(pt.p.x for pt in points) / n, sum(pt.p.y for pt in points) / n)


def time_weighted_centroid(points: Sequence[TrackPoint]) -> PlanarPoint:
    """tv-weighted mean position; plain centroid when every tv is zero."""
    if len(points) == 0:
        raise TrajectoryValidationError("time-weighted centroid of zero points", indices=[])
    total = sum(pt.tv for pt in points)
    if total == 0:
        return centroid(points)
    return PlanarPoint(
        sum(pt.p.x * pt.tv for pt in points) / total,
        sum(pt.p.y * pt.tv for pt in points) / total,
    )


class WeightedCentroid:
    """Running ``time_weighted_centroid`` over a growing point set.

    Sums accumulate in insertion order, so the value is bit-identical to
    recomputing ``time_weighted_centroid`` over the same list.
    """

    __slots__ = ("_sx", "_sy", "_sw", "_px", "_py", "_n")

    def __init__(self, first: TrackPoint):
        self._sx = self._sy = self._px = self._py = 0
        self._sw = self._n = 0
        self.add(first)

    def add(self, pt: TrackPoint) -> None:
        self._sx += pt.p.x * pt.tv
        self._sy += pt.p.y * pt.tv
        self._sw += pt.tv
        self._px += pt.p.x
        self._py += pt.p.y
        self._n += 1

    @property
    def value(self) -> PlanarPoint:
        if self._sw == 0:
            return PlanarPoint(self._px / self._n, self._py / self._n)
        return PlanarPoint(self._sx / self._sw, self._sy / self._sw)


def mbr(traj: Union[Trajectory, Sequence[TrackPoint]]) -> BoundingBox:
    points = traj.points if isinstance(traj, Trajectory) else traj
    return BoundingBox.from_points(pt.p for pt in points)


def _is_header(first_field: str) -> bool:
    try:
        float(first_field)
        return False
    except ValueError:
        pass
    try:
        dateparser.isoparse(first_field)
        return False
    except (ValueError, OverflowError):
        return True


def parse_trajectory_csv(text: str) -> List[Tuple[int, float, float]]:
    """``t,lat,lon`` rows; ``#`` comments and an optional header are skipped.

    Extra columns after ``lon`` are ignored.
    """
    records: List[Tuple[int, float, float]] = []
    seen_data = False
    for line_number, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if not seen_data and _is_header(row[0].strip()):
            seen_data = True
            continue
        seen_data = True
        if len(row) < 3:
            raise RecordParseError(f"line {line_number}: expected t,lat,lon", line_number=line_number)
        try:
            lat, lon = float(row[1]), float(row[2])
        except ValueError:
            raise RecordParseError(f"line {line_number}: bad coordinate", line_number=line_number) from None
        records.append((parse_timestamp(row[0], line_number), lat, lon))
    return records


def load_trajectory_csv(path: str, origin: Optional[Origin] = None) -> Trajectory:
    with open(path, "r", encoding="utf-8") as f:
        records = parse_trajectory_csv(f.read())
    return ingest(records, origin)


# FreeSim exports use the same column order with ISO timestamps and extra
# columns; the shared parser already covers both.
load_freesim_csv = load_trajectory_csv


def trajectory_to_csv(traj: Trajectory) -> str:
    lines = ["t,lat,lon"]
    for pt in traj.points:
        lat, lon = unproject(pt.p, traj.origin)
        lines.append(f"{pt.t},{format_number(lat)},{format_number(lon)}")
    return "\n".join(lines) + "\n"
