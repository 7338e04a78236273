import pytest
import shapely

from factories import destination_from_region, stay_from_region
from src.trajectory import Trajectory


@pytest.fixture
def box_stay():
    def make(stay_id, minx, miny, maxx, maxy):
        return stay_from_region(stay_id, shapely.box(minx, miny, maxx, maxy))
    return make


@pytest.fixture
def four_polygons():
    """Four destinations and six fixes; fix 4 sits inside d3 but nearer d4's centroid."""
    destinations = [
        destination_from_region(1, shapely.box(0, 100, 20, 120)),
        destination_from_region(2, shapely.box(60, 100, 80, 120)),
        destination_from_region(3, shapely.box(0, 0, 100, 20)),
        destination_from_region(4, shapely.box(110, 0, 130, 20)),
    ]
    traj = Trajectory.from_planar([
        (0, 5, 105), (600, 10, 110), (1200, 15, 115), (1800, 70, 110), (2400, 96, 12), (3000, 120, 10),
    ])
    return destinations, traj
