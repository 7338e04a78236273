import math
from itertools import combinations

import numpy as np
import pytest
import shapely

from factories import destination_from_region
from src.errors import PartitionError
from src.partition import (
    CellKind, FinalGrid, GridCell, assign_cells, build_final_grid, build_micro_grid, partition_trajectory,
    validate_partition,
)
from src.trajectory import Trajectory
from utils.file_io import round_array, round_number, round_outward
from utils.geometry import BoundingBox, PlanarPoint, intersection_area, jaccard


def _bbox(w, h):
    return BoundingBox(0, 0, w, h)


def test_micro_grid_exact_multiple():
    micro = build_micro_grid(_bbox(10, 10), 5)
    assert (micro.rows, micro.cols, len(micro)) == (2, 2, 4)
    assert all(c.area == 25 for c in micro.cells)


def test_micro_grid_clips_last_row():
    micro = build_micro_grid(_bbox(10, 7), 5)
    assert (micro.rows, micro.cols) == (2, 2)
    top_left = micro.cells[micro.position(1, 0)]
    assert top_left.bounds == (0, 5, 5, 7)
    assert top_left.area == 10


@pytest.mark.parametrize("w, h, size", [(10, 7, 5), (13.3, 2.1, 0.7), (100, 1, 3), (2, 2, 5)])
def test_micro_grid_tiles_the_box(w, h, size):
    micro = build_micro_grid(_bbox(w, h), size)
    assert math.fsum(shapely.area(micro.cells)) == pytest.approx(w * h, abs=1e-9)
    assert micro.rows == max(1, math.ceil(h / size - 1e-9))
    assert micro.cols == max(1, math.ceil(w / size - 1e-9))


def test_micro_grid_guards():
    with pytest.raises(PartitionError):
        build_micro_grid(BoundingBox(0, 0, 10, 0), 5)
    with pytest.raises(PartitionError):
        build_micro_grid(_bbox(10, 10), 0)
    with pytest.raises(PartitionError) as err:
        build_micro_grid(_bbox(1e6, 1e6), 0.01)
    assert err.value.details["limit"] == 10 ** 8


def test_single_destination_covering_everything():
    micro = build_micro_grid(_bbox(20, 20), 5)
    goi = assign_cells(micro, [destination_from_region(7, shapely.box(-1, -1, 21, 21))])
    assert (goi.labels == 7).all()
    assert goi.gois[7].area == pytest.approx(400)
    grid = build_final_grid(goi, micro)
    assert len(grid.goi_cells) == 1 and grid.filler_cells == []


def test_aligned_disjoint_destinations_are_reproduced_exactly():
    micro = build_micro_grid(_bbox(40, 40), 5)
    d1, d2 = shapely.box(0, 0, 10, 15), shapely.box(20, 20, 40, 30)
    goi = assign_cells(micro, [destination_from_region(1, d1), destination_from_region(2, d2)])
    assert goi.gois[1].symmetric_difference(d1).area == pytest.approx(0, abs=1e-9)
    assert goi.gois[2].symmetric_difference(d2).area == pytest.approx(0, abs=1e-9)


def test_no_destinations_is_an_error():
    with pytest.raises(PartitionError):
        assign_cells(build_micro_grid(_bbox(10, 10), 5), [])


def test_unknown_metric_is_an_error():
    with pytest.raises(PartitionError):
        assign_cells(build_micro_grid(_bbox(10, 10), 5), [destination_from_region(1, shapely.box(0, 0, 5, 5))], "XYZ")


def _brute_force_labels(micro, destinations, metric):
    labels = []
    for cell in micro.cells:
        best = None
        for d in sorted(destinations, key=lambda d: d.id):
            if intersection_area(cell, d.geometry) <= 0:
                continue
            if metric == "GS":
                score = jaccard(cell, d.geometry)
            else:
                dist = cell.centroid.distance(d.geometry.centroid)
                score = math.inf if dist == 0 else 1.0 / dist
            if best is None or score > best[0]:
                best = (score, d.id)
        labels.append(-1 if best is None else best[1])
    return labels


@pytest.mark.parametrize("metric", ["GS", "PCS"])
def test_assignment_matches_per_pair_oracle(metric):
    rng = np.random.default_rng(17)
    for _ in range(30):
        micro = build_micro_grid(_bbox(20, 20), 5)
        destinations = []
        for k in range(2):
            x, y = rng.uniform(-3, 15, size=2)
            w, h = rng.uniform(3, 12, size=2)
            destinations.append(destination_from_region(k + 1, shapely.box(x, y, x + w, y + h)))
        goi = assign_cells(micro, destinations, metric)
        assert goi.labels.tolist() == _brute_force_labels(micro, destinations, metric)
        for a, b in combinations(goi.gois.values(), 2):
            assert intersection_area(a, b) == 0.0


def test_pcs_prefers_nearer_centroid():
    micro = build_micro_grid(_bbox(10, 5), 5)
    # the big one covers both cells, the small one is exactly the right cell
    big = destination_from_region(1, shapely.box(-100, -100, 100, 100))
    small = destination_from_region(2, shapely.box(5, 0, 10, 5))
    goi = assign_cells(micro, [big, small], "PCS")
    assert goi.labels.tolist() == [1, 2]


def test_equal_scores_go_to_smallest_id():
    micro = build_micro_grid(_bbox(10, 10), 10)
    same = shapely.box(0, 0, 10, 10)
    goi = assign_cells(micro, [destination_from_region(5, same), destination_from_region(3, same)])
    assert goi.labels.tolist() == [3]


def test_final_grid_numbering_and_filler_cells():
    micro = build_micro_grid(_bbox(15, 5), 5)
    goi = assign_cells(micro, [destination_from_region(9, shapely.box(10, 0, 15, 5))])
    grid = build_final_grid(goi, micro)
    assert [(c.id, c.kind, c.source_destination) for c in grid.cells] == [
        (0, CellKind.GOI, 9), (1, CellKind.FILLER, None), (2, CellKind.FILLER, None)]
    assert grid.cells[1].geometry.bounds == (0, 0, 5, 5)


def test_locate_uses_smallest_id_on_shared_edges():
    micro = build_micro_grid(_bbox(15, 5), 5)
    goi = assign_cells(micro, [destination_from_region(9, shapely.box(10, 0, 15, 5))])
    grid = build_final_grid(goi, micro)
    assert grid.locate(PlanarPoint(10, 2)).id == 0
    assert grid.locate(PlanarPoint(5, 2)).id == 1
    assert grid.locate(PlanarPoint(2, 2)).id == 1
    assert grid.locate(PlanarPoint(50, 50)) is None
    pts = [PlanarPoint(10, 2), PlanarPoint(5, 2), PlanarPoint(50, 50)]
    assert grid.locate_many(pts).tolist() == [0, 1, -1]


def test_grid_cell_invariants():
    with pytest.raises(PartitionError):
        GridCell(0, shapely.box(0, 0, 1, 1), CellKind.GOI)
    with pytest.raises(PartitionError):
        GridCell(0, shapely.box(0, 0, 1, 1), CellKind.FILLER, 4)
    with pytest.raises(PartitionError):
        GridCell(0, shapely.box(0, 0, 0, 1), CellKind.FILLER)


def _random_instance(rng):
    n = 60
    xy = rng.uniform(0, 200, size=(n, 2))
    traj = Trajectory.from_planar((k * 60, x, y) for k, (x, y) in enumerate(xy))
    destinations = []
    for k in range(int(rng.integers(1, 5))):
        cx, cy = rng.uniform(0, 200, size=2)
        destinations.append(destination_from_region(k, shapely.Point(cx, cy).buffer(rng.uniform(10, 40))))
    return traj, destinations


@pytest.mark.parametrize("metric", ["GS", "PCS"])
def test_built_grids_pass_validation(metric):
    rng = np.random.default_rng(23)
    for _ in range(10):
        traj, destinations = _random_instance(rng)
        _, _, grid = partition_trajectory(traj, destinations, cell_size=5.0, metric=metric)
        report = validate_partition(grid, traj)
        assert report.passed, report.as_dict()
        assert report.max_overlap_area < 1e-3 and report.uncovered_area < 1e-3
        labels = grid.locate_many([pt.p for pt in traj])
        assert (labels >= 0).all()


def test_validator_flags_overlap():
    bbox = _bbox(10, 5)
    cells = [GridCell(0, shapely.box(0, 0, 6, 5), CellKind.FILLER), GridCell(1, shapely.box(5, 0, 10, 5), CellKind.FILLER)]
    traj = Trajectory.from_planar([(0, 5.5, 2), (1, 1, 1)])
    report = validate_partition(FinalGrid.from_cells(cells, bbox), traj)
    assert report.max_overlap_area == pytest.approx(5.0)
    assert report.unmatched_indices == [0]
    assert not report.passed


def test_validator_flags_missing_cell():
    bbox = _bbox(15, 5)
    cells = [GridCell(0, shapely.box(0, 0, 5, 5), CellKind.FILLER), GridCell(1, shapely.box(10, 0, 15, 5), CellKind.FILLER)]
    traj = Trajectory.from_planar([(0, 7, 2), (1, 1, 1)])
    report = validate_partition(FinalGrid.from_cells(cells, bbox), traj)
    assert report.uncovered_area == pytest.approx(25.0)
    assert report.unmatched_indices == [0]
    assert not report.passed


def test_micro_grid_edges_survive_output_rounding():
    bbox = BoundingBox(-123.456789012345, -81.1234567891, 250.987654321987, 300.666666666666)
    micro = build_micro_grid(bbox, 7.3)
    assert micro.bbox.min_x <= bbox.min_x and micro.bbox.min_y <= bbox.min_y
    assert micro.bbox.max_x >= bbox.max_x and micro.bbox.max_y >= bbox.max_y
    coords = shapely.get_coordinates(micro.cells)
    assert (coords == round_array(coords)).all()
    assert [round_number(v) for v in micro.bbox.as_tuple()] == list(micro.bbox.as_tuple())


@pytest.mark.parametrize("value", [-123.456789012345, 250.987654321987, 1e-7 + 1, 42.0])
def test_round_outward_brackets_the_value(value):
    below, above = round_outward(value, -1), round_outward(value, 1)
    assert below <= value <= above
    assert round_number(below) == below and round_number(above) == above
