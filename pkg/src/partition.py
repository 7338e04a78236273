"""Phase 3: micro-grid -> GOI-grid -> final-grid, plus the partition validator.

Cells of the final grid are numbered GOI cells first (ascending destination
id), then filler cells in micro-grid row-major order, so a cell's id is also
its position in ``FinalGrid.cells``.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
import shapely

from config.app_logging import logger
from config.pipeline_defaults import CELL_SIZE_METERS, MAX_MICRO_CELLS, PARTITION_TOLERANCE
from src.destinations import Destination
from src.errors import PartitionError
from src.trajectory import Trajectory, mbr
from utils.file_io import round_array, round_outward
from utils.geometry import (
    BoundingBox, PlanarPoint, Region, SpatialIndex, intersection_areas, point_array, union_all,
)


class CellKind(str, Enum):
    GOI = "goi"
    FILLER = "filler"


@dataclass(frozen=True)
class GridCell:
    id: int
    geometry: Region
    kind: CellKind
    source_destination: Optional[int] = None

    def __post_init__(self):
        if not self.geometry.area > 0:
            raise PartitionError(f"cell {self.id} has no area", cell=self.id)
        if (self.kind == CellKind.GOI) != (self.source_destination is not None):
            raise PartitionError(
                f"cell {self.id}: goi cells need a source destination, filler cells must not have one",
                cell=self.id)


@dataclass(frozen=True)
class MicroGrid:
    cells: np.ndarray          # shapely boxes, row-major from the bottom-left corner
    rows: int
    cols: int
    cell_size: float
    bbox: BoundingBox

    def __len__(self) -> int:
        return len(self.cells)

    def position(self, row: int, col: int) -> int:
        return row * self.cols + col


def _edges(lo: float, hi: float, count: int, cell_size: float) -> np.ndarray:
    edges = lo + cell_size * np.arange(count + 1, dtype=float)
    edges[-1] = hi
    # edges at output precision, so a written grid reloads unchanged
    return np.unique(round_array(edges))


def _snap_outward(bbox: BoundingBox) -> BoundingBox:
    return BoundingBox(round_outward(bbox.min_x, -1), round_outward(bbox.min_y, -1),
                       round_outward(bbox.max_x, 1), round_outward(bbox.max_y, 1))


def build_micro_grid(bbox: BoundingBox, cell_size: float = CELL_SIZE_METERS) -> MicroGrid:
    if not cell_size > 0:
        raise PartitionError(f"cell_size must be positive, got {cell_size}")
    if bbox.is_degenerate:
        raise PartitionError(
            f"bounding box {bbox.as_tuple()} has zero width or height; nothing to partition",
            bbox=list(bbox.as_tuple()))
    bbox = _snap_outward(bbox)

    # the 1e-9 slack keeps an exact multiple from growing a zero-width column
    cols = max(1, math.ceil(bbox.width / cell_size - 1e-9))
    rows = max(1, math.ceil(bbox.height / cell_size - 1e-9))
    if rows * cols > MAX_MICRO_CELLS:
        raise PartitionError(
            f"micro-grid would hold {rows * cols} cells (limit {MAX_MICRO_CELLS}); raise cell_size",
            cells=rows * cols, limit=MAX_MICRO_CELLS)

    xs = _edges(bbox.min_x, bbox.max_x, cols, cell_size)
    ys = _edges(bbox.min_y, bbox.max_y, rows, cell_size)
    cols, rows = len(xs) - 1, len(ys) - 1
    x0, y0 = np.meshgrid(xs[:-1], ys[:-1])
    x1, y1 = np.meshgrid(xs[1:], ys[1:])
    cells = shapely.box(x0.ravel(), y0.ravel(), x1.ravel(), y1.ravel())
    logger.info(f"Micro-grid: {rows} x {cols} cells of {cell_size} m")
    return MicroGrid(cells, rows, cols, float(cell_size), bbox)


@dataclass(frozen=True)
class GoiGrid:
    labels: np.ndarray             # destination id per micro cell, -1 when unlabeled
    gois: Dict[int, Region]        # destination id -> union of its cells
    metric: str

    @property
    def labeled_count(self) -> int:
        return int(np.count_nonzero(self.labels >= 0))


def _cell_scores(micro: MicroGrid, destinations: Sequence[Destination], cell_pos: np.ndarray,
                 dest_pos: np.ndarray, metric: str) -> np.ndarray:
    dest_geoms = np.empty(len(destinations), dtype=object)
    dest_geoms[:] = [d.geometry for d in destinations]
    cells = micro.cells[cell_pos]
    targets = dest_geoms[dest_pos]

    if metric == "GS":
        inter = intersection_areas(cells, targets)
        union_area = shapely.area(cells) + shapely.area(targets) - inter
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = np.minimum(1.0, inter / union_area)
        scores[shapely.equals_exact(cells, targets, 0.0)] = 1.0
        return scores

    if metric == "PCS":
        distance = shapely.distance(shapely.centroid(cells), shapely.centroid(targets))
        with np.errstate(divide="ignore"):
            return np.where(distance == 0.0, np.inf, 1.0 / distance)

    raise PartitionError(f"unknown cell metric {metric!r}", metric=metric)


def assign_cells(micro: MicroGrid, destinations: Sequence[Destination], metric: str = "GS") -> GoiGrid:
    """Label each micro cell that overlaps a destination with its best-scoring one.

    GS scores a (cell, destination) pair by Jaccard similarity, PCS by the
    reciprocal centroid distance. Only destinations the cell overlaps with
    positive area are candidates; ties go to the smallest destination id.
    """
    if len(destinations) == 0:
        raise PartitionError("cannot build a GOI grid without destinations")
    if metric not in ("GS", "PCS"):
        raise PartitionError(f"unknown cell metric {metric!r}", metric=metric)

    index = SpatialIndex.build([(d.id, d.geometry) for d in destinations])
    cell_pos, dest_pos = index.query_many(micro.cells)
    overlap = intersection_areas(micro.cells[cell_pos], index.geometries[dest_pos])
    keep = overlap > 0
    cell_pos, dest_pos = cell_pos[keep], dest_pos[keep]

    labels = np.full(len(micro), -1, dtype=np.int64)
    if len(cell_pos):
        ordered = list(destinations)
        scores = _cell_scores(micro, ordered, cell_pos, dest_pos, metric)
        dest_ids = index.ids[dest_pos]
        # per cell: highest score first, then smallest id
        order = np.lexsort((dest_ids, -scores, cell_pos))
        cell_sorted = cell_pos[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = cell_sorted[1:] != cell_sorted[:-1]
        labels[cell_sorted[first]] = dest_ids[order][first]

    gois: Dict[int, Region] = {}
    for dest_id in np.unique(labels[labels >= 0]):
        gois[int(dest_id)] = union_all(list(micro.cells[labels == dest_id]))

    missing = sorted({d.id for d in destinations} - set(gois))
    if missing:
        logger.warning(f"Destinations {missing} won no micro cell and have no GOI")
    logger.info(f"GOI grid ({metric}): {int(np.count_nonzero(labels >= 0))} of {len(micro)} cells "
                f"labeled, {len(gois)} GOIs")
    return GoiGrid(labels, gois, metric)


@dataclass(frozen=True)
class FinalGrid:
    cells: List[GridCell]
    bbox: BoundingBox
    lookup: SpatialIndex

    @classmethod
    def from_cells(cls, cells: Sequence[GridCell], bbox: BoundingBox) -> "FinalGrid":
        cells = sorted(cells, key=lambda c: c.id)
        if [c.id for c in cells] != list(range(len(cells))):
            raise PartitionError("final-grid cell ids must be 0..n-1")
        return cls(list(cells), bbox, SpatialIndex.build([(c.id, c.geometry) for c in cells]))

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def goi_cells(self) -> List[GridCell]:
        return [c for c in self.cells if c.kind == CellKind.GOI]

    @property
    def filler_cells(self) -> List[GridCell]:
        return [c for c in self.cells if c.kind == CellKind.FILLER]

    def locate(self, p: PlanarPoint) -> Optional[GridCell]:
        """Smallest-id cell containing or touching ``p``; None outside every cell."""
        hits = self.lookup.query(shapely.Point(p.x, p.y))
        return self.cells[hits[0]] if hits else None

    def locate_many(self, points: Sequence[PlanarPoint]) -> np.ndarray:
        """Vectorised ``locate``: cell id per point, -1 where no cell matches."""
        found = np.full(len(points), np.iinfo(np.int64).max, dtype=np.int64)
        if len(points) == 0:
            return found
        point_pos, cell_pos = self.lookup.query_many(point_array(points))
        np.minimum.at(found, point_pos, self.lookup.ids[cell_pos])
        found[found == np.iinfo(np.int64).max] = -1
        return found


def build_final_grid(goi: GoiGrid, micro: MicroGrid) -> FinalGrid:
    if len(goi.labels) != len(micro):
        raise PartitionError("GOI grid was not built from this micro-grid",
                             labels=len(goi.labels), cells=len(micro))
    cells: List[GridCell] = []
    for dest_id in sorted(goi.gois):
        cells.append(GridCell(len(cells), goi.gois[dest_id], CellKind.GOI, dest_id))
    for pos in np.flatnonzero(goi.labels < 0):
        cells.append(GridCell(len(cells), micro.cells[pos], CellKind.FILLER))
    grid = FinalGrid.from_cells(cells, micro.bbox)
    logger.info(f"Final grid: {len(grid.goi_cells)} GOI cells + {len(grid.filler_cells)} filler cells")
    return grid


@dataclass(frozen=True)
class PartitionReport:
    max_overlap_area: float
    uncovered_area: float
    unmatched_points: int
    unmatched_indices: List[int]
    tolerance: float = PARTITION_TOLERANCE

    @property
    def passed(self) -> bool:
        return (self.max_overlap_area < self.tolerance
                and self.uncovered_area < self.tolerance
                and self.unmatched_points == 0)

    def as_dict(self) -> dict:
        return {
            "max_overlap_area": self.max_overlap_area,
            "uncovered_area": self.uncovered_area,
            "unmatched_points": self.unmatched_points,
            "unmatched_indices": self.unmatched_indices,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def validate_partition(grid: FinalGrid, traj: Trajectory) -> PartitionReport:
    """Check the disjointness and single-assignment constraints of a final grid.

    A point is unmatched when no cell covers it or when it lies in the
    interior of two or more cells.
    """
    geoms = grid.lookup.geometries
    left, right = grid.lookup.query_many(geoms)
    keep = left < right
    left, right = left[keep], right[keep]
    # cells that only share an edge have envelopes overlapping with zero extent
    bounds = shapely.bounds(geoms)
    width = np.minimum(bounds[left, 2], bounds[right, 2]) - np.maximum(bounds[left, 0], bounds[right, 0])
    height = np.minimum(bounds[left, 3], bounds[right, 3]) - np.maximum(bounds[left, 1], bounds[right, 1])
    keep = (width > 0) & (height > 0)
    overlaps = intersection_areas(geoms[left[keep]], geoms[right[keep]])
    max_overlap = float(overlaps.max()) if len(overlaps) else 0.0

    clipped = intersection_areas(geoms, grid.bbox.to_region())
    covered = math.fsum(clipped) - math.fsum(overlaps)
    uncovered = max(0.0, grid.bbox.area - covered)

    unmatched: List[int] = []
    if len(traj):
        points = point_array([pt.p for pt in traj.points])
        touching = np.zeros(len(traj), dtype=np.int64)
        inside = np.zeros(len(traj), dtype=np.int64)
        point_pos, _ = grid.lookup.query_many(points, predicate="intersects")
        np.add.at(touching, point_pos, 1)
        point_pos, _ = grid.lookup.query_many(points, predicate="within")
        np.add.at(inside, point_pos, 1)
        unmatched = [int(i) for i in np.flatnonzero((touching == 0) | (inside >= 2))]

    report = PartitionReport(max_overlap, uncovered, len(unmatched), unmatched)
    if report.passed:
        logger.info(f"Partition valid: overlap {max_overlap:.3g} m², uncovered {uncovered:.3g} m²")
    else:
        logger.warning(f"Partition invalid: overlap {max_overlap:.3g} m², uncovered {uncovered:.3g} m², "
                       f"{len(unmatched)} unmatched points")
    return report


def partition_trajectory(traj: Trajectory, destinations: Sequence[Destination],
                         cell_size: float = CELL_SIZE_METERS, metric: str = "GS"):
    """Micro-grid over the trajectory's MBR, then the GOI grid and final grid."""
    micro = build_micro_grid(mbr(traj), cell_size)
    goi = assign_cells(micro, destinations, metric)
    return micro, goi, build_final_grid(goi, micro)
