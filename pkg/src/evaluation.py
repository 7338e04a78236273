"""Evaluation: geometric similarity against ground truth, stage statistics,
and side-by-side runs of the proposed pipeline and the two baselines."""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from config.app_logging import logger
from config.config import TOOL_NAME, TOOL_VERSION, PipelineConfig
from src.destinations import Destination, MergeParams, extract_destinations
from src.errors import GeometryError, GoiPartitionError
from src.partition import partition_trajectory
from src.stay_extraction import Stay, StayParams, extract_stays
from src.trajectory import Trajectory
from utils.file_io import round_number
from utils.geometry import Region, SpatialIndex, jaccard

# (stay method, destination method) per compared pipeline
METHOD_PIPELINES: Dict[str, Tuple[str, str]] = {
    "geometric": ("twc", "geometric"),
    "density": ("refpoint", "optics"),
    "diameter": ("diameter", "diameter"),
}


@dataclass(frozen=True)
class GroundTruth:
    gois: Tuple[Tuple[int, Region], ...]

    def __post_init__(self):
        ids = [gid for gid, _ in self.gois]
        if len(set(ids)) != len(ids):
            raise GeometryError("ground-truth GOI ids must be unique", ids=ids)
        flat = [gid for gid, region in self.gois if not region.area > 0]
        if flat:
            raise GeometryError(f"ground-truth GOIs {flat} have no area", ids=flat)

    def __len__(self) -> int:
        return len(self.gois)

    @property
    def regions(self) -> List[Region]:
        return [region for _, region in self.gois]


def geometric_similarity(truth: GroundTruth, estimated: Sequence[Region]) -> float:
    """(1/n) times the sum of Jaccard(r_i, g_j) over every real/estimated pair.

    Pairs that do not intersect contribute zero, so only index hits are scored.
    """
    if len(truth) == 0:
        raise GeometryError("geometric similarity needs at least one ground-truth GOI")
    estimates = [g for g in estimated if not g.is_empty]
    if not estimates:
        return 0.0
    index = SpatialIndex(list(enumerate(estimates)))
    total = 0.0
    for _, r in truth.gois:
        for pos in index.query(r):
            total += jaccard(r, estimates[pos])
    return total / len(truth)


def stay_stats(stays: Sequence[Stay]) -> Dict[str, int]:
    return {
        "count": len(stays),
        "single_point_count": sum(1 for s in stays if s.point_count == 1),
    }


def destination_stats(destinations: Sequence[Destination]) -> Dict[str, object]:
    histogram = Counter(d.frequency for d in destinations)
    return {
        "count": len(destinations),
        "frequency_histogram": {int(k): histogram[k] for k in sorted(histogram)},
    }


@dataclass
class MethodRun:
    method: str
    stays: Dict[str, int]
    destinations: Dict[str, object]
    goi_count: int
    score: Optional[float]           # None when no ground truth was supplied
    error: Optional[dict] = None

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "stays": self.stays,
            "destinations": self.destinations,
            "goi_count": self.goi_count,
            "geometric_similarity": None if self.score is None else round_number(self.score),
            "error": self.error,
        }


def run_method(traj: Trajectory, config: PipelineConfig, method: str,
               truth: Optional[GroundTruth] = None) -> MethodRun:
    """One compared pipeline: stays, destinations, then the GOIs of the GOI grid."""
    stay_method, destination_method = METHOD_PIPELINES[method]
    stays = extract_stays(traj, StayParams(config.d_max, config.t_min, config.buffer, config.diam_max),
                          stay_method)
    params = MergeParams(config.j_min, config.f_min, config.eps, config.min_pts, config.diameter_min)
    # every compared pipeline gets the same visit-frequency floor
    destinations = [d for d in extract_destinations(stays, params, destination_method) if d.frequency >= config.f_min]

    gois: List[Region] = []
    error = None
    if destinations:
        try:
            _, goi, _ = partition_trajectory(traj, destinations, config.cell_size, config.metric)
            gois = [goi.gois[k] for k in sorted(goi.gois)]
        except GoiPartitionError as e:
            logger.warning(f"{method}: partition failed: {e}")
            error = e.to_record()
    else:
        logger.warning(f"{method}: no destinations extracted")

    score = geometric_similarity(truth, gois) if truth is not None else None
    return MethodRun(method, stay_stats(stays), destination_stats(destinations), len(gois), score, error)


@dataclass
class Comparison:
    seeds: List[int]
    runs: Dict[str, List[MethodRun]] = field(default_factory=dict)

    def mean_score(self, method: str) -> Optional[float]:
        scores = [r.score for r in self.runs.get(method, []) if r.score is not None]
        return sum(scores) / len(scores) if scores else None

    def mean_destinations(self, method: str) -> Optional[float]:
        counts = [r.destinations["count"] for r in self.runs.get(method, [])]
        return sum(counts) / len(counts) if counts else None


def compare_methods(scenarios: Sequence[Tuple[int, Trajectory, Optional[GroundTruth]]],
                    config: PipelineConfig,
                    methods: Sequence[str] = tuple(METHOD_PIPELINES)) -> Comparison:
    """Run every method on every ``(seed, trajectory, truth)`` scenario."""
    comparison = Comparison(seeds=[seed for seed, _, _ in scenarios])
    for method in methods:
        comparison.runs[method] = [run_method(traj, config, method, truth) for _, traj, truth in scenarios]
        mean = comparison.mean_score(method)
        logger.info(f"{method}: mean geometric similarity "
                    f"{'n/a' if mean is None else format(mean, '.4f')} over {len(scenarios)} scenario(s)")
    return comparison


def evaluation_report(comparison: Comparison, config: PipelineConfig) -> dict:
    methods = {}
    for method, runs in comparison.runs.items():
        mean_score = comparison.mean_score(method)
        methods[method] = {
            "pipeline": {"stays": METHOD_PIPELINES[method][0], "destinations": METHOD_PIPELINES[method][1]},
            "mean_geometric_similarity": None if mean_score is None else round_number(mean_score),
            "mean_destination_count": round_number(comparison.mean_destinations(method) or 0.0),
            "runs": [r.as_dict() for r in runs],
        }
    return {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "parameters": config.as_dict(),
        "seeds": comparison.seeds,
        "methods": methods,
    }
