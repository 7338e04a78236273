import math
from typing import Iterable, NamedTuple, Optional, Tuple

import shapely

from config.pipeline_defaults import EARTH_RADIUS_METERS
from src.errors import RejectedInputError
from utils.geometry import PlanarPoint, Region, make_point


class Origin(NamedTuple):
    """Latitude/longitude of the local frame's (0, 0)."""
    lat: float
    lon: float


def check_latlon(lat: float, lon: float, index: Optional[int] = None) -> None:
    if not (math.isfinite(lat) and math.isfinite(lon)) or abs(lat) > 90 or abs(lon) > 180:
        where = f" at record {index}" if index is not None else ""
        raise RejectedInputError(f"coordinate out of range{where}: lat={lat}, lon={lon}", index=index)


def project(lat: float, lon: float, origin: Origin, index: Optional[int] = None) -> PlanarPoint:
    """Local equirectangular projection around ``origin`` (metres east/north)."""
    check_latlon(lat, lon, index)
    x = EARTH_RADIUS_METERS * math.cos(math.radians(origin.lat)) * math.radians(lon - origin.lon)
    y = EARTH_RADIUS_METERS * math.radians(lat - origin.lat)
    return make_point(x, y)


def unproject(point: PlanarPoint, origin: Origin) -> Tuple[float, float]:
    lat = origin.lat + math.degrees(point.y / EARTH_RADIUS_METERS)
    lon = origin.lon + math.degrees(point.x / (EARTH_RADIUS_METERS * math.cos(math.radians(origin.lat))))
    return lat, lon


def centroid_origin(latlons: Iterable[Tuple[float, float]]) -> Origin:
    """Default origin: the mean of all input fixes."""
    lats, lons = [], []
    for lat, lon in latlons:
        lats.append(lat)
        lons.append(lon)
    if not lats:
        raise RejectedInputError("cannot derive a projection origin from zero records")
    return Origin(sum(lats) / len(lats), sum(lons) / len(lons))


def reframe(region: Region, source: Origin, target: Origin) -> Region:
    """Move a region from the ``source`` local frame into the ``target`` frame."""
    if source == target:
        return region

    src_scale = EARTH_RADIUS_METERS * math.cos(math.radians(source.lat))
    dst_scale = EARTH_RADIUS_METERS * math.cos(math.radians(target.lat))

    def _move(coords):
        lon = source.lon + (coords[:, 0] / src_scale) * 180.0 / math.pi
        lat = source.lat + (coords[:, 1] / EARTH_RADIUS_METERS) * 180.0 / math.pi
        out = coords.copy()
        out[:, 0] = dst_scale * (lon - target.lon) * math.pi / 180.0
        out[:, 1] = EARTH_RADIUS_METERS * (lat - target.lat) * math.pi / 180.0
        return out

    return shapely.transform(region, _move)
