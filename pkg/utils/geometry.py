"""Planar geometry kernel.

Regions are shapely ``Polygon``/``MultiPolygon`` values in the local metric
frame. Boolean operations drop lower-dimensional debris (touching edges,
points) and snap slivers below ``SLIVER_AREA`` to the empty polygon, so
disjointness checks downstream see exact zeros.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Sequence, Tuple, Union

import numpy as np
import shapely
from shapely.geometry import MultiPoint, MultiPolygon, Point, Polygon
from shapely.geometry.base import BaseGeometry

from config.pipeline_defaults import QUAD_SEGMENTS, SLIVER_AREA
from src.errors import GeometryError

Region = Union[Polygon, MultiPolygon]

EMPTY_REGION = Polygon()


class PlanarPoint(NamedTuple):
    x: float  # metres east of the local origin
    y: float  # metres north of the local origin


def make_point(x: float, y: float) -> PlanarPoint:
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite coordinate ({x}, {y})")
    return PlanarPoint(float(x), float(y))


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise GeometryError(f"inverted bounding box {self.as_tuple()}")

    @classmethod
    def from_points(cls, points: Iterable[PlanarPoint]) -> "BoundingBox":
        xs, ys = [], []
        for p in points:
            xs.append(p.x)
            ys.append(p.y)
        if not xs:
            raise GeometryError("bounding box of zero points")
        return cls(min(xs), min(ys), max(xs), max(ys))

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def is_degenerate(self) -> bool:
        return self.width <= 0 or self.height <= 0

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.min_x, self.min_y, self.max_x, self.max_y)

    def to_region(self) -> Polygon:
        return shapely.box(self.min_x, self.min_y, self.max_x, self.max_y)

    def contains(self, p: PlanarPoint) -> bool:
        return self.min_x <= p.x <= self.max_x and self.min_y <= p.y <= self.max_y


def _snap(value: float) -> float:
    return 0.0 if value < SLIVER_AREA else value


def _polygonal(geom: BaseGeometry) -> Region:
    """Keep the areal part of ``geom``; slivers become empty."""
    if geom.is_empty:
        return EMPTY_REGION
    if not isinstance(geom, (Polygon, MultiPolygon)):
        parts = [g for g in shapely.get_parts(geom) if isinstance(g, (Polygon, MultiPolygon))]
        if not parts:
            return EMPTY_REGION
        geom = parts[0] if len(parts) == 1 else shapely.union_all(parts)
    if geom.area < SLIVER_AREA:
        return EMPTY_REGION
    return geom


def convex_hull(points: Sequence[PlanarPoint]) -> BaseGeometry:
    """Smallest convex set containing ``points``.

    One point or collinear points give a Point/LineString hull with zero
    area; such hulls are only meant to be fed to ``buffer``.
    """
    if len(points) == 0:
        raise GeometryError("convex hull of zero points")
    return MultiPoint([tuple(p) for p in points]).convex_hull


def buffer(region: BaseGeometry, width: float) -> Region:
    if not width > 0:
        raise GeometryError(f"buffer width must be positive, got {width}")
    return region.buffer(width, quad_segs=QUAD_SEGMENTS)


def area(r):
    return r.area


def intersection(a: Region, b: Region) -> Region:
    return _polygonal(shapely.intersection(a, b))


def union(a, b):
    return _polygonal(shapely.union(a, b))


def union_all(regions: Sequence[Region]) -> Region:
    if len(regions) == 0:
        return EMPTY_REGION
    return _polygonal(shapely.union_all(list(regions)))


def intersection_area(a: Region, b: Region) -> float:
    return _snap(shapely.area(shapely.intersection(a, b)))


def intersection_areas(a, b) -> np.ndarray:
    """Element-wise ``intersection_area`` over aligned geometry arrays."""
    areas = shapely.area(shapely.intersection(a, b))
    areas = np.asarray(areas, dtype=float)
    areas[areas < SLIVER_AREA] = 0.0
    return areas


def jaccard(a: Region, b: Region) -> float:
    """Area(a ∩ b) / Area(a ∪ b), with the union area by inclusion–exclusion."""
    area_a, area_b = a.area, b.area
    if area_a <= 0 and area_b <= 0:
        raise GeometryError("jaccard of two zero-area regions is undefined")
    if shapely.equals_exact(a, b, 0.0):
        return 1.0
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return min(1.0, inter / (area_a + area_b - inter))


def euclidean_distance(p: PlanarPoint, q: PlanarPoint) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


def covers_point(region, p):
    """Point inside or on the boundary of ``region``."""
    return region.covers(Point(p.x, p.y))


def point_array(points: Sequence[PlanarPoint]) -> np.ndarray:
    coords = np.array([(p.x, p.y) for p in points], dtype=float).reshape(-1, 2)
    return shapely.points(coords)


class SpatialIndex:
    """STR-packed R-tree over ``(id, region)`` entries.

    Candidates from the tree are verified with an exact ``intersects`` test,
    so callers only ever see true intersectors (boundary contact included).
    The index is immutable once built.
    """

    def __init__(self, entries: Sequence[Tuple[int, BaseGeometry]]):
        self._ids = np.array([eid for eid, _ in entries], dtype=np.int64)
        self._geoms = np.empty(len(entries), dtype=object)
        self._geoms[:] = [g for _, g in entries]
        self._tree = shapely.STRtree(self._geoms) if len(entries) else None

    @classmethod
    def build(cls, entries: Sequence[Tuple[int, BaseGeometry]]) -> "SpatialIndex":
        if len(entries) == 0:
            raise GeometryError("cannot build a spatial index from zero entries")
        return cls(entries)

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def geometries(self) -> np.ndarray:
        return self._geoms

    def query(self, probe: BaseGeometry) -> List[int]:
        """Ids of every entry intersecting ``probe``, ascending."""
        if self._tree is None:
            return []
        hits = self._tree.query(probe, predicate="intersects")
        return sorted(int(i) for i in self._ids[hits])

    def query_many(self, probes, predicate: str = "intersects") -> Tuple[np.ndarray, np.ndarray]:
        """Vectorised query: ``(probe positions, entry positions)`` of matching pairs."""
        if self._tree is None:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        pairs = self._tree.query(probes, predicate=predicate)
        return pairs[0], pairs[1]


def index_build(entries: Sequence[Tuple[int, BaseGeometry]]) -> SpatialIndex:
    return SpatialIndex.build(entries)


def index_query(idx: SpatialIndex, probe: BaseGeometry) -> List[int]:
    return idx.query(probe)
