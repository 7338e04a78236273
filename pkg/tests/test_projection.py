import math

import pytest
import shapely

from src.errors import RejectedInputError
from utils.geometry import PlanarPoint
from utils.projection import Origin, centroid_origin, check_latlon, project, reframe, unproject

ANCHORAGE = Origin(61.2181, -149.9003)


def test_origin_projects_to_zero():
    p = project(ANCHORAGE.lat, ANCHORAGE.lon, ANCHORAGE)
    assert p == PlanarPoint(0.0, 0.0)


def test_one_degree_of_latitude_is_about_111_km():
    p = project(ANCHORAGE.lat + 1.0, ANCHORAGE.lon, ANCHORAGE)
    assert p.x == 0.0
    assert p.y == pytest.approx(111195, rel=1e-3)


def test_longitude_shrinks_with_latitude():
    p = project(ANCHORAGE.lat, ANCHORAGE.lon + 1.0, ANCHORAGE)
    assert p.x == pytest.approx(111195 * math.cos(math.radians(ANCHORAGE.lat)), rel=1e-3)


def test_unproject_inverts_project():
    p = project(61.22, -149.88, ANCHORAGE)
    lat, lon = unproject(p, ANCHORAGE)
    assert lat == pytest.approx(61.22, abs=1e-12)
    assert lon == pytest.approx(-149.88, abs=1e-12)


@pytest.mark.parametrize("lat, lon", [(91, 0), (-90.5, 0), (0, 181), (float("nan"), 0)])
def test_out_of_range_coordinates_are_rejected(lat, lon):
    with pytest.raises(RejectedInputError) as err:
        check_latlon(lat, lon, 4)
    assert err.value.details["index"] == 4


def test_centroid_origin():
    assert centroid_origin([(10, 20), (12, 22)]) == Origin(11, 21)
    with pytest.raises(RejectedInputError):
        centroid_origin([])


def test_reframe_moves_region_between_frames():
    other = Origin(61.21, -149.91)
    box = shapely.box(100, 100, 150, 160)
    moved = reframe(box, ANCHORAGE, other)
    # a corner lands where projecting its lat/lon into the other frame puts it
    lat, lon = unproject(PlanarPoint(100, 100), ANCHORAGE)
    expected = project(lat, lon, other)
    minx, miny, _, _ = moved.bounds
    assert minx == pytest.approx(expected.x, abs=1e-6)
    assert miny == pytest.approx(expected.y, abs=1e-6)
    assert moved.area == pytest.approx(box.area, rel=1e-3)
    assert reframe(box, ANCHORAGE, ANCHORAGE) is box
