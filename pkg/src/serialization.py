"""Readers and writers for every pipeline artifact.

Geometries are written in the local planar frame (metres); every
FeatureCollection carries the projection origin as a top-level ``origin``
member. All numbers go through ``round_number`` so a written file, loaded
and written again, is byte-identical.
"""

import json
import os
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import shapely
from shapely.geometry import mapping, shape

from config.config import TOOL_NAME, TOOL_VERSION
from src.destinations import Destination
from src.errors import RecordParseError, StageMismatchError
from src.evaluation import GroundTruth
from src.partition import CellKind, FinalGrid, GoiGrid, GridCell
from src.stay_extraction import Stay
from src.svl import SvlEntry, SvlKind
from src.trajectory import Trajectory, trajectory_to_csv
from utils.file_io import (
    dumps_json, file_digest, format_number, load_json, round_array, round_number, write_json_atomic,
    write_text_atomic,
)
from utils.geometry import BoundingBox, PlanarPoint, Region
from utils.projection import Origin, reframe


def rounded(geom):
    return shapely.transform(geom, round_array)


def _origin_member(origin: Origin) -> Dict[str, float]:
    return {"lat": round_number(origin.lat), "lon": round_number(origin.lon)}


def _feature(fid: int, geom, properties: Mapping[str, Any]) -> Dict[str, Any]:
    return {"type": "Feature", "id": fid, "geometry": mapping(rounded(geom)), "properties": dict(properties)}


def feature_collection(features: List[Dict[str, Any]], origin: Origin,
                       bbox: Optional[BoundingBox] = None) -> Dict[str, Any]:
    fc: Dict[str, Any] = {"type": "FeatureCollection", "origin": _origin_member(origin), "features": features}
    if bbox is not None:
        fc["bbox"] = [round_number(v) for v in bbox.as_tuple()]
    return fc


def read_feature_collection(path: str) -> Tuple[Dict[str, Any], Origin]:
    data = load_json(path)
    if data.get("type") != "FeatureCollection" or "origin" not in data:
        raise RecordParseError(f"{path} is not a FeatureCollection with an origin member", path=path)
    return data, Origin(float(data["origin"]["lat"]), float(data["origin"]["lon"]))


def _geometry(feature: Mapping[str, Any]) -> Region:
    return shape(feature["geometry"])


# Metadata sidecars

def sidecar_path(path: str) -> str:
    return f"{path}.meta.json"


def write_sidecar(path: str, stage: str, parameters: Mapping[str, Any], inputs: Mapping[str, str],
                  **extra: Any) -> None:
    """Record how ``path`` was produced: parameters, input digests, tool version."""
    meta = {
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "stage": stage,
        "parameters": dict(parameters),
        "inputs": dict(inputs),
        "digest": file_digest(path),
    }
    meta.update(extra)
    write_json_atomic(sidecar_path(path), meta)


def read_sidecar(path: str) -> Dict[str, Any]:
    meta_path = sidecar_path(path)
    if not os.path.isfile(meta_path):
        raise StageMismatchError(f"{path} has no metadata sidecar; was it written by {TOOL_NAME}?", path=path)
    return load_json(meta_path)


def check_input(path: str, name: str, actual: str) -> Dict[str, Any]:
    """Refuse ``path`` unless it was built from an input whose digest is ``actual``."""
    meta = read_sidecar(path)
    expected = meta.get("inputs", {}).get(name)
    if expected != actual:
        raise StageMismatchError(
            f"{path} was built from a different {name}", path=path, input=name,
            expected=expected, actual=actual)
    return meta


# Trajectory

def export_trajectory_csv(path: str, traj: Trajectory) -> None:
    write_text_atomic(path, trajectory_to_csv(traj))


# Stays

def stays_to_geojson(stays: Sequence[Stay], origin: Origin) -> Dict[str, Any]:
    features = [
        _feature(s.id, s.g, {
            "id": s.id,
            "at": s.at,
            "dt": s.dt,
            "first": s.span[0],
            "last": s.span[1],
            "point_count": s.point_count,
            "centroid": [round_number(s.c.x), round_number(s.c.y)],
        })
        for s in stays
    ]
    return feature_collection(features, origin)


def write_stays(path: str, stays: Sequence[Stay], origin: Origin) -> None:
    write_json_atomic(path, stays_to_geojson(stays, origin))


def _check_frame(path: str, origin: Origin, traj: Trajectory) -> None:
    if origin != Origin(round_number(traj.origin.lat), round_number(traj.origin.lon)):
        raise StageMismatchError(f"{path} uses another projection origin", path=path)


def _check_span(path: str, first: int, last: int, traj: Trajectory, what: str) -> None:
    if not 0 <= first <= last < len(traj):
        raise StageMismatchError(f"{what} spans points outside the trajectory", path=path)


def load_stays(path: str, traj: Trajectory) -> List[Stay]:
    """Stays of ``traj``; point sets are rebuilt from the stored index spans."""
    data, origin = read_feature_collection(path)
    _check_frame(path, origin, traj)
    stays = []
    for f in data["features"]:
        p = f["properties"]
        first, last = int(p["first"]), int(p["last"])
        _check_span(path, first, last, traj, f"stay {p['id']}")
        cx, cy = p["centroid"]
        stays.append(Stay(int(p["id"]), _geometry(f), tuple(traj.points[first:last + 1]),
                          PlanarPoint(float(cx), float(cy)), int(p["at"]), int(p["dt"]), (first, last)))
    return stays


# Stays manifest

STAYS_MANIFEST_HEADER = "id,at,dt,point_count,centroid_x,centroid_y"


class StayManifestRow(NamedTuple):
    id: int
    at: int
    dt: int
    point_count: int
    centroid_x: float
    centroid_y: float


def stays_manifest_path(path: str) -> str:
    """The CSV manifest that sits next to a stays GeoJSON."""
    root, ext = os.path.splitext(path)
    return root + (".manifest.csv" if ext.lower() == ".csv" else ".csv")


def stays_to_csv(stays: Iterable[Stay]) -> str:
    lines = [STAYS_MANIFEST_HEADER]
    lines.extend(f"{s.id},{s.at},{s.dt},{s.point_count},{format_number(s.c.x)},{format_number(s.c.y)}"
                 for s in stays)
    return "\n".join(lines) + "\n"


def write_stays_manifest(path: str, stays: Sequence[Stay]) -> None:
    write_text_atomic(path, stays_to_csv(stays))


def load_stays_manifest(path: str) -> List[StayManifestRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if line_number == 1:
                if line.strip() != STAYS_MANIFEST_HEADER:
                    raise RecordParseError(f"{path}: not a stays manifest", line_number=1)
                continue
            if not line.strip():
                continue
            try:
                sid, at, dt, count, cx, cy = line.strip().split(",")
                rows.append(StayManifestRow(int(sid), int(at), int(dt), int(count), float(cx), float(cy)))
            except ValueError:
                raise RecordParseError(f"{path}:{line_number}: bad stays manifest row",
                                       line_number=line_number) from None
    return rows


# Destinations

def destinations_to_geojson(destinations: Sequence[Destination], stays: Sequence[Stay], origin: Origin,
                            method: str = "geometric", params: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    spans = {s.id: list(s.span) for s in stays}
    params = {k: round_number(v) if isinstance(v, float) else v for k, v in (params or {}).items()}
    features = [
        _feature(d.id, d.geometry, {
            "id": d.id,
            "frequency": d.frequency,
            "members": list(d.members),
            "spans": [spans[m] for m in d.members],
            "method": method,
            "params": params,
        })
        for d in destinations
    ]
    return feature_collection(features, origin)


def write_destinations(path: str, destinations: Sequence[Destination], stays: Sequence[Stay], origin: Origin,
                       method: str = "geometric", params: Optional[Mapping[str, Any]] = None) -> None:
    write_json_atomic(path, destinations_to_geojson(destinations, stays, origin, method, params))


def load_destinations(path: str, traj: Trajectory) -> List[Destination]:
    data, origin = read_feature_collection(path)
    _check_frame(path, origin, traj)
    destinations = []
    for f in data["features"]:
        p = f["properties"]
        points = []
        for first, last in p["spans"]:
            _check_span(path, int(first), int(last), traj, f"destination {p['id']}")
            points.extend(traj.points[int(first):int(last) + 1])
        destinations.append(Destination(int(p["id"]), _geometry(f), tuple(points), int(p["frequency"]),
                                        tuple(int(m) for m in p["members"])))
    return destinations


# Grids

def final_grid_to_geojson(grid: FinalGrid, origin: Origin) -> Dict[str, Any]:
    features = [
        _feature(c.id, c.geometry, {"id": c.id, "kind": c.kind.value, "source_destination": c.source_destination})
        for c in grid.cells
    ]
    return feature_collection(features, origin, grid.bbox)


def write_final_grid(path: str, grid: FinalGrid, origin: Origin) -> None:
    write_json_atomic(path, final_grid_to_geojson(grid, origin))


def load_final_grid(path: str) -> Tuple[FinalGrid, Origin]:
    data, origin = read_feature_collection(path)
    if "bbox" not in data:
        raise RecordParseError(f"{path} has no bbox member", path=path)
    cells = []
    for f in data["features"]:
        p = f["properties"]
        source = p.get("source_destination")
        cells.append(GridCell(int(p["id"]), _geometry(f), CellKind(p["kind"]),
                              None if source is None else int(source)))
    return FinalGrid.from_cells(cells, BoundingBox(*(float(v) for v in data["bbox"]))), origin


def goi_grid_to_geojson(goi: GoiGrid, origin: Origin) -> Dict[str, Any]:
    features = [_feature(dest_id, goi.gois[dest_id], {"destination": dest_id, "metric": goi.metric})
                for dest_id in sorted(goi.gois)]
    return feature_collection(features, origin)


def write_goi_grid(path: str, goi: GoiGrid, origin: Origin) -> None:
    write_json_atomic(path, goi_grid_to_geojson(goi, origin))


# Ground truth

def truth_to_geojson(truth: GroundTruth, origin: Origin) -> Dict[str, Any]:
    return feature_collection([_feature(gid, region, {"id": gid}) for gid, region in truth.gois], origin)


def write_truth(path: str, truth: GroundTruth, origin: Origin) -> None:
    write_json_atomic(path, truth_to_geojson(truth, origin))


def load_truth(path: str, target: Optional[Origin] = None) -> GroundTruth:
    """Ground truth, moved into the ``target`` frame when one is given."""
    data, origin = read_feature_collection(path)
    gois = []
    for f in data["features"]:
        region = _geometry(f)
        if target is not None:
            region = reframe(region, origin, target)
        gois.append((int(f["properties"]["id"]), region))
    return GroundTruth(tuple(gois))


# SVL

def svl_to_csv(entries: Iterable[SvlEntry]) -> str:
    lines = ["t,label,kind"]
    lines.extend(f"{e.t},{e.label},{e.kind.value}" for e in entries)
    return "\n".join(lines) + "\n"


def svl_to_jsonl(entries: Iterable[SvlEntry]) -> str:
    return "".join(
        json.dumps({"t": e.t, "label": e.label, "kind": e.kind.value}, sort_keys=True) + "\n" for e in entries)


def write_svl(path: str, entries: Sequence[SvlEntry]) -> None:
    """CSV, or JSON-lines when ``path`` ends in ``.jsonl``."""
    text = svl_to_jsonl(entries) if path.endswith(".jsonl") else svl_to_csv(entries)
    write_text_atomic(path, text)


def load_svl(path: str) -> List[SvlEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        if path.endswith(".jsonl"):
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    entries.append(SvlEntry(int(row["t"]), int(row["label"]), SvlKind(row["kind"])))
                except (ValueError, KeyError):
                    raise RecordParseError(f"{path}:{line_number}: bad SVL record", line_number=line_number) from None
            return entries
        for line_number, line in enumerate(f, start=1):
            if line_number == 1 or not line.strip():
                continue
            try:
                t, label, kind = line.strip().split(",")
                entries.append(SvlEntry(int(t), int(label), SvlKind(kind)))
            except ValueError:
                raise RecordParseError(f"{path}:{line_number}: bad SVL row", line_number=line_number) from None
    return entries


def write_report(path: str, report: Mapping[str, Any]) -> None:
    write_text_atomic(path, dumps_json(report))
