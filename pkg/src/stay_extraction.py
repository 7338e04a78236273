"""Phase 1: trajectory -> stay regions.

Three extractors share one stay-construction rule (buffered convex hull,
centroid of the buffered geometry) and differ only in how a candidate grows
and breaks:

* ``extract_stays_twc``: distance to the time-weighted centroid of the
  candidate, dwell measured up to ``t_j + tv_j``.
* ``extract_stays_reference_point``: distance to the first point of the
  candidate, dwell ``t_j - t_i``.
* ``extract_stays_diameter``: diameter of the candidate, dwell ``t_j - t_i``.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from shapely.geometry.base import BaseGeometry

from config.app_logging import logger
from config.pipeline_defaults import BUFFER_METERS, D_MAX_METERS, DIAM_MAX_METERS, T_MIN_SECONDS
from src.errors import ConfigError
from src.trajectory import TrackPoint, Trajectory, WeightedCentroid
from utils.geometry import PlanarPoint, Region, buffer, convex_hull, euclidean_distance


@dataclass(frozen=True)
class StayParams:
    d_max: float = D_MAX_METERS
    t_min: int = T_MIN_SECONDS
    buffer_width: float = BUFFER_METERS
    diam_max: float = DIAM_MAX_METERS

    def __post_init__(self):
        for name in ("d_max", "t_min", "buffer_width", "diam_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive", key=name)


@dataclass(frozen=True)
class Stay:
    id: int
    g: Region                       # buffered convex hull of ps
    ps: Tuple[TrackPoint, ...]
    c: PlanarPoint                  # centroid of g
    at: int                         # arrival, epoch seconds
    dt: int                         # departure, epoch seconds
    span: Tuple[int, int]           # [first, last] trajectory index of ps

    @property
    def point_count(self) -> int:
        return len(self.ps)

    @property
    def duration(self) -> int:
        return self.dt - self.at


@dataclass
class AdmissionEvent:
    index: int
    distance: float
    out_of_radius: bool


@dataclass
class StayDiagnostics:
    """What the TWC extractor did besides emitting stays."""
    out_of_radius_admissions: int = 0
    trace: List[AdmissionEvent] = field(default_factory=list)
    keep_trace: bool = False

    def admitted(self, index: int, distance: float, out_of_radius: bool) -> None:
        if out_of_radius:
            self.out_of_radius_admissions += 1
        if self.keep_trace:
            self.trace.append(AdmissionEvent(index, distance, out_of_radius))


def stay_geometry(ps: Sequence[TrackPoint], buffer_width: float) -> BaseGeometry:
    return buffer(convex_hull([pt.p for pt in ps]), buffer_width)


def make_stay(stay_id: int, traj: Trajectory, first: int, last: int, at: int, dt: int,
              buffer_width: float) -> Stay:
    """Stay over ``traj[first..last]`` (inclusive)."""
    ps = tuple(traj.points[first:last + 1])
    g = stay_geometry(ps, buffer_width)
    c = g.centroid
    return Stay(stay_id, g, ps, PlanarPoint(c.x, c.y), at, dt, (first, last))


def extract_stays_twc(traj: Trajectory, params: StayParams,
                      diagnostics: Optional[StayDiagnostics] = None) -> List[Stay]:
    """Time-weighted-centroid stay extraction.

    Each outer step seeds a fresh candidate with p_i. A point beyond
    ``d_max`` of the candidate's time-weighted centroid closes the candidate
    if ``(t_j + tv_j) - t_i >= t_min``; otherwise it is admitted anyway and
    the scan goes on. When the scan runs out, the next seed is p_{i+1}.
    """
    pts = traj.points
    n = len(pts)
    stays: List[Stay] = []
    diagnostics = diagnostics if diagnostics is not None else StayDiagnostics()
    i = 0
    while i < n:
        twc = WeightedCentroid(pts[i])
        centre = twc.value
        emitted = False
        j = i + 1
        while j < n:
            pj = pts[j]
            dd = euclidean_distance(centre, pj.p)
            out_of_radius = dd > params.d_max
            if out_of_radius:
                dt = pj.t + pj.tv
                if dt - pts[i].t >= params.t_min:
                    stays.append(make_stay(len(stays), traj, i, j - 1, pts[i].t, dt, params.buffer_width))
                    i = j
                    emitted = True
                    break
            diagnostics.admitted(j, dd, out_of_radius)
            twc.add(pj)
            centre = twc.value
            j += 1
        if not emitted:
            i += 1

    if diagnostics.out_of_radius_admissions:
        logger.warning(
            f"TWC extraction admitted {diagnostics.out_of_radius_admissions} point(s) "
            f"beyond d_max={params.d_max} m before t_min was reached")
    logger.info(f"TWC extraction: {len(stays)} stays from {n} fixes")
    return stays


class _ReferenceWindow:
    """Candidate anchored at its first point, never refreshed."""

    def __init__(self, coords: np.ndarray, seed: int, params: StayParams):
        self.coords, self.anchor, self.limit = coords, coords[seed], params.d_max

    def admits(self, j: int) -> bool:
        dx, dy = self.coords[j] - self.anchor
        return math.hypot(dx, dy) <= self.limit


class _DiameterWindow:
    """Candidate bounded by the largest pairwise distance of its points."""

    def __init__(self, coords: np.ndarray, seed: int, params: StayParams):
        self.coords, self.seed, self.limit = coords, seed, params.diam_max
        self.diameter = 0.0

    def admits(self, j: int) -> bool:
        offsets = self.coords[self.seed:j] - self.coords[j]
        reach = float(np.hypot(offsets[:, 0], offsets[:, 1]).max())
        grown = max(self.diameter, reach)
        if grown > self.limit:
            return False
        self.diameter = grown
        return True


def _break_and_emit(traj: Trajectory, params: StayParams, window_type, label: str) -> List[Stay]:
    """Shared loop of the two baselines.

    The candidate seeded at p_i grows while its window admits p_j. On the
    first p_j it refuses, p_i..p_{j-1} is emitted when it holds at least two
    points and ``t_j - t_i >= t_min``; otherwise the next seed is p_{i+1}.
    """
    pts = traj.points
    n = len(pts)
    coords = np.array([(pt.p.x, pt.p.y) for pt in pts], dtype=float).reshape(-1, 2)
    stays: List[Stay] = []
    i = 0
    while i < n:
        window = window_type(coords, i, params)
        j = i + 1
        while j < n and window.admits(j):
            j += 1
        if j < n and j - i >= 2 and pts[j].t - pts[i].t >= params.t_min:
            stays.append(make_stay(len(stays), traj, i, j - 1, pts[i].t, pts[j].t, params.buffer_width))
            i = j
        else:
            i += 1
    logger.info(f"{label} extraction: {len(stays)} stays from {n} fixes")
    return stays


def extract_stays_reference_point(traj: Trajectory, params: StayParams) -> List[Stay]:
    return _break_and_emit(traj, params, _ReferenceWindow, "Reference-point")


def extract_stays_diameter(traj: Trajectory, params: StayParams) -> List[Stay]:
    return _break_and_emit(traj, params, _DiameterWindow, "Diameter")


EXTRACTORS = {
    "twc": extract_stays_twc,
    "refpoint": extract_stays_reference_point,
    "diameter": extract_stays_diameter,
}


def extract_stays(traj: Trajectory, params: StayParams, method: str = "twc") -> List[Stay]:
    try:
        extractor = EXTRACTORS[method]
    except KeyError:
        raise ConfigError(f"unknown stay extraction method {method!r}", key="stay_method") from None
    return extractor(traj, params)
