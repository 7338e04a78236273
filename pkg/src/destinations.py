"""Phase 2: stay regions -> destination regions.

``merge_geometric_similarity`` is agglomerative clustering on region
Jaccard similarity; ``optics_cluster`` and ``merge_diameter`` are the two
point-based baselines. All three hand Phase 3 the same shape: a destination
whose geometry is the union of its member stay geometries.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import shapely
from sklearn.cluster import OPTICS

from config.app_logging import logger
from config.pipeline_defaults import DIAMETER_MIN_METERS, EPS_METERS, F_MIN, J_MIN, MIN_PTS
from src.errors import ConfigError
from src.stay_extraction import Stay
from src.trajectory import TrackPoint
from utils.geometry import Region, SpatialIndex, jaccard, union, union_all


@dataclass(frozen=True)
class MergeParams:
    j_min: float = J_MIN
    f_min: int = F_MIN
    eps: float = EPS_METERS
    min_pts: int = MIN_PTS
    diameter_min: float = DIAMETER_MIN_METERS

    def __post_init__(self):
        if not 0.0 <= self.j_min <= 1.0:
            raise ConfigError("j_min must lie in [0, 1]", key="j_min")
        if self.f_min < 1:
            raise ConfigError("f_min must be at least 1", key="f_min")
        if not self.eps > 0:
            raise ConfigError("eps must be positive", key="eps")
        if self.min_pts < 2:
            raise ConfigError("min_pts must be at least 2", key="min_pts")
        if not self.diameter_min > 0:
            raise ConfigError("diameter_min must be positive", key="diameter_min")


@dataclass(frozen=True)
class Destination:
    id: int                          # smallest member stay id
    geometry: Region
    points: Tuple[TrackPoint, ...]
    frequency: int
    members: Tuple[int, ...]         # member stay ids, ascending

    @property
    def centroid(self) -> Tuple[float, float]:
        c = self.geometry.centroid
        return (c.x, c.y)


class _Cluster:
    __slots__ = ("id", "geometry", "points", "frequency", "members")

    def __init__(self, stay: Stay):
        self.id = stay.id
        self.geometry = stay.g
        self.points: List[TrackPoint] = list(stay.ps)
        self.frequency = 1
        self.members: List[int] = [stay.id]

    def absorb(self, other: "_Cluster") -> None:
        self.geometry = union(self.geometry, other.geometry)
        self.points.extend(other.points)
        self.frequency += other.frequency
        self.members.extend(other.members)

    def freeze(self) -> Destination:
        # member stays never overlap in time, so this is also ascending member order
        points = tuple(sorted(self.points, key=lambda pt: pt.t))
        return Destination(self.id, self.geometry, points, self.frequency, tuple(sorted(self.members)))


def _pair(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _best(scores: Dict[Tuple[int, int], float], prefer_high: bool) -> Optional[Tuple[Tuple[int, int], float]]:
    """Best-scoring pair; ties go to the smaller (min id, max id) key."""
    if not scores:
        return None
    sign = -1.0 if prefer_high else 1.0
    key = min(scores, key=lambda k: (sign * scores[k], k))
    return key, scores[key]


def merge_geometric_similarity(stays: Sequence[Stay], params: MergeParams,
                               apply_frequency_filter: bool = True) -> List[Destination]:
    """Merge the globally most similar intersecting pair while its Jaccard exceeds ``j_min``.

    Clusters visited fewer than ``f_min`` times are dropped at the end.
    """
    clusters: Dict[int, _Cluster] = {s.id: _Cluster(s) for s in stays}
    if not clusters:
        return []

    def similarities_of(cid: int, index: SpatialIndex) -> Dict[Tuple[int, int], float]:
        found = {}
        for other in index.query(clusters[cid].geometry):
            if other != cid:
                a, b = _pair(cid, other)
                found[(a, b)] = jaccard(clusters[a].geometry, clusters[b].geometry)
        return found

    index = SpatialIndex([(cid, c.geometry) for cid, c in clusters.items()])
    scores: Dict[Tuple[int, int], float] = {}
    for cid in clusters:
        scores.update(similarities_of(cid, index))

    merges = 0
    while True:
        best = _best(scores, prefer_high=True)
        if best is None or not best[1] > params.j_min:
            break
        (keep, gone), sim = best
        logger.debug(f"Merging cluster {gone} into {keep} (Jaccard {sim:.4f})")
        clusters[keep].absorb(clusters.pop(gone))
        merges += 1
        scores = {k: v for k, v in scores.items() if keep not in k and gone not in k}
        index = SpatialIndex([(cid, c.geometry) for cid, c in clusters.items()])
        scores.update(similarities_of(keep, index))

    merged = [clusters[cid].freeze() for cid in sorted(clusters)]
    logger.info(f"Geometric merge: {len(stays)} stays -> {len(merged)} clusters after {merges} merges")
    if not apply_frequency_filter:
        return merged
    kept = [d for d in merged if d.frequency >= params.f_min]
    logger.info(f"Frequency filter f_min={params.f_min} kept {len(kept)} destinations")
    return kept


def _compose(members: Sequence[Stay]) -> Destination:
    members = sorted(members, key=lambda s: s.id)
    points: List[TrackPoint] = []
    for s in members:
        points.extend(s.ps)
    return Destination(
        id=members[0].id,
        geometry=union_all([s.g for s in members]),
        points=tuple(points),
        frequency=len(members),
        members=tuple(s.id for s in members),
    )


def _fit_optics(stays: Sequence[Stay], params: MergeParams) -> Optional[OPTICS]:
    if len(stays) < params.min_pts:
        return None
    X = np.array([[s.c.x, s.c.y] for s in stays], dtype=float)
    model = OPTICS(min_samples=params.min_pts, max_eps=np.inf, metric="euclidean",
                   cluster_method="dbscan", eps=params.eps)
    return model.fit(X)


def optics_cluster(stays: Sequence[Stay], params: MergeParams) -> List[Destination]:
    """Density clusters of stay centroids, cut flat at ``eps``; noise is dropped."""
    model = _fit_optics(stays, params)
    if model is None:
        if stays:
            logger.warning(f"OPTICS: {len(stays)} stays < min_pts={params.min_pts}, everything is noise")
        return []

    groups: Dict[int, List[Stay]] = {}
    for stay, label in zip(stays, model.labels_):
        if label >= 0:
            groups.setdefault(int(label), []).append(stay)
    destinations = sorted((_compose(g) for g in groups.values()), key=lambda d: d.id)
    noise = int(np.sum(model.labels_ < 0))
    logger.info(f"OPTICS: {len(destinations)} destinations, {noise} noise stays")
    return destinations


def optics_ordering(stays: Sequence[Stay], params: MergeParams) -> List[Tuple[int, Optional[float]]]:
    """``(stay id, reachability distance)`` in OPTICS order; ``None`` for undefined."""
    model = _fit_optics(stays, params)
    if model is None:
        return []
    ordering = []
    for pos in model.ordering_:
        r = float(model.reachability_[pos])
        ordering.append((stays[pos].id, r if np.isfinite(r) else None))
    return ordering


def _hull_vertices(points: Sequence[TrackPoint]) -> np.ndarray:
    coords = np.array([(pt.p.x, pt.p.y) for pt in points], dtype=float)
    hull = shapely.convex_hull(shapely.multipoints(coords))
    return np.unique(shapely.get_coordinates(hull), axis=0)


def _diameter(coords: np.ndarray) -> float:
    diff = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=-1)).max())


def merge_diameter(stays: Sequence[Stay], params: MergeParams) -> List[Destination]:
    """Repeatedly merge the pair whose merged point set has the smallest diameter,
    while that diameter is at most ``diameter_min``."""
    members: Dict[int, List[Stay]] = {s.id: [s] for s in stays}
    if not members:
        return []
    # the diameter of a point set is attained between convex hull vertices
    hulls: Dict[int, np.ndarray] = {s.id: _hull_vertices(s.ps) for s in stays}
    reach = params.diameter_min / 2.0

    def envelope(cid: int):
        lo, hi = hulls[cid].min(axis=0), hulls[cid].max(axis=0)
        return shapely.box(lo[0] - reach, lo[1] - reach, hi[0] + reach, hi[1] + reach)

    def diameters_of(cid: int, index: SpatialIndex) -> Dict[Tuple[int, int], float]:
        found = {}
        for other in index.query(envelope(cid)):
            if other != cid:
                found[_pair(cid, other)] = _diameter(np.vstack([hulls[cid], hulls[other]]))
        return found

    index = SpatialIndex([(cid, envelope(cid)) for cid in members])
    scores: Dict[Tuple[int, int], float] = {}
    for cid in members:
        scores.update(diameters_of(cid, index))

    while True:
        best = _best(scores, prefer_high=False)
        if best is None or best[1] > params.diameter_min:
            break
        (keep, gone), _ = best
        members[keep].extend(members.pop(gone))
        hulls[keep] = _hull_vertices([pt for s in members[keep] for pt in s.ps])
        del hulls[gone]
        scores = {k: v for k, v in scores.items() if keep not in k and gone not in k}
        index = SpatialIndex([(cid, envelope(cid)) for cid in members])
        scores.update(diameters_of(keep, index))

    destinations = [_compose(members[cid]) for cid in sorted(members)]
    logger.info(f"Diameter merge: {len(stays)} stays -> {len(destinations)} destinations")
    return destinations


def extract_destinations(stays: Sequence[Stay], params: MergeParams, method: str = "geometric") -> List[Destination]:
    if method == "geometric":
        return merge_geometric_similarity(stays, params)
    if method == "optics":
        return optics_cluster(stays, params)
    if method == "diameter":
        return merge_diameter(stays, params)
    raise ConfigError(f"unknown destination method {method!r}", key="destination_method")


# MergeParams fields each method reads
METHOD_PARAMETERS = {"geometric": ("j_min", "f_min"), "optics": ("eps", "min_pts"), "diameter": ("diameter_min",)}


def method_parameters(params: MergeParams, method: str) -> Dict[str, float]:
    return {name: getattr(params, name) for name in METHOD_PARAMETERS[method]}
