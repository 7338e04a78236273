"""Sequence of Visited Locations: label every fix of a trajectory with a place."""

from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

import numpy as np

from config.app_logging import logger
from src.destinations import Destination
from src.errors import LabelingError
from src.partition import CellKind, FinalGrid
from src.trajectory import Trajectory


class SvlKind(str, Enum):
    GOI = "goi"
    FILLER = "filler"
    DESTINATION = "destination"


@dataclass(frozen=True)
class SvlEntry:
    t: int
    label: int
    kind: SvlKind


def collapse(entries: Sequence[SvlEntry]) -> List[SvlEntry]:
    """Keep the first entry of every run of equal (label, kind)."""
    out: List[SvlEntry] = []
    for e in entries:
        if out and out[-1].label == e.label and out[-1].kind == e.kind:
            continue
        out.append(e)
    return out


def label_by_intersection(traj: Trajectory, grid: FinalGrid, collapse_runs: bool = False) -> List[SvlEntry]:
    """Label each fix with the final-grid cell it falls in.

    GOI cells contribute their source destination id, filler cells their own
    cell id. Fixes on a shared edge go to the smallest-id cell.
    """
    outside = [i for i, pt in enumerate(traj.points) if not grid.bbox.contains(pt.p)]
    if outside:
        raise LabelingError(
            f"point {outside[0]} lies outside the grid bounding box; "
            f"was the grid built from another trajectory?", index=outside[0])

    cell_ids = grid.locate_many([pt.p for pt in traj.points])
    missing = np.flatnonzero(cell_ids < 0)
    if len(missing):
        raise LabelingError(f"point {int(missing[0])} is covered by no cell", index=int(missing[0]))

    entries = []
    for pt, cell_id in zip(traj.points, cell_ids):
        cell = grid.cells[int(cell_id)]
        if cell.kind == CellKind.GOI:
            entries.append(SvlEntry(pt.t, cell.source_destination, SvlKind.GOI))
        else:
            entries.append(SvlEntry(pt.t, cell.id, SvlKind.FILLER))
    if collapse_runs:
        entries = collapse(entries)
    logger.info(f"Intersection labeling: {len(entries)} SVL entries from {len(traj)} fixes")
    return entries


def label_by_nnq(traj: Trajectory, destinations: Sequence[Destination],
                 collapse_runs: bool = False) -> List[SvlEntry]:
    """Label each fix with the destination whose centroid is nearest (ties: smallest id)."""
    if len(destinations) == 0:
        raise LabelingError("nearest-neighbour labeling needs at least one destination")
    ordered = sorted(destinations, key=lambda d: d.id)
    ids = np.array([d.id for d in ordered], dtype=np.int64)
    centres = np.array([d.centroid for d in ordered], dtype=float)

    entries = []
    for pt in traj.points:
        distance = np.hypot(centres[:, 0] - pt.p.x, centres[:, 1] - pt.p.y)
        # argmin returns the first minimum, i.e. the smallest id
        entries.append(SvlEntry(pt.t, int(ids[int(np.argmin(distance))]), SvlKind.DESTINATION))
    if collapse_runs:
        entries = collapse(entries)
    logger.info(f"NNQ labeling: {len(entries)} SVL entries over {len(ordered)} destinations")
    return entries
