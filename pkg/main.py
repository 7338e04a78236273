#!/usr/bin/env python3
# main.py
"""
CLI for the GOI partitioning pipeline.

    extract-stays         trajectory CSV      -> stays GeoJSON
    extract-destinations  stays GeoJSON       -> destinations GeoJSON
    partition             destinations        -> final grid + GOI grid + validation report
    label                 final grid / dests  -> SVL (CSV or JSON-lines)
    evaluate              GOIs vs. truth, or a seeded batch comparing all methods
    synth                 seeded scenario     -> trajectory CSV + truth GeoJSON
    pipeline              all of the above in one go

Every artifact gets a ``.meta.json`` sidecar holding the parameters and the
digests of its inputs; later stages refuse artifacts built from another
trajectory.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, replace
from typing import Dict, List, Optional

from shapely.geometry import shape

from config.app_logging import attach_file_handler, logger
from config.config import PipelineConfig, load_config, read_flat_config
from src.destinations import MergeParams, extract_destinations, method_parameters, optics_ordering
from src.errors import GoiPartitionError, PartitionError
from src.evaluation import compare_methods, destination_stats, evaluation_report, geometric_similarity, stay_stats
from src.partition import partition_trajectory, validate_partition
from src.serialization import (
    check_input, export_trajectory_csv, load_destinations, load_final_grid, load_stays, load_truth,
    read_feature_collection, read_sidecar, stays_manifest_path, write_destinations, write_final_grid,
    write_goi_grid, write_report, write_sidecar, write_stays, write_stays_manifest, write_svl, write_truth,
)
from src.stay_extraction import EXTRACTORS, StayDiagnostics, StayParams, extract_stays_twc
from src.svl import label_by_intersection, label_by_nnq
from src.synthetic import ScenarioSpec, simulate
from src.trajectory import load_trajectory_csv
from utils.file_io import file_digest, round_number
from utils.projection import reframe


def stay_params(config: PipelineConfig) -> StayParams:
    return StayParams(config.d_max, config.t_min, config.buffer, config.diam_max)


def merge_params(config: PipelineConfig) -> MergeParams:
    return MergeParams(config.j_min, config.f_min, config.eps, config.min_pts, config.diameter_min)


def _load_trajectory(path: str):
    return load_trajectory_csv(path), file_digest(path)


def run_extract_stays(traj_path: str, out: str, config: PipelineConfig):
    traj, digest = _load_trajectory(traj_path)
    extra = {}
    if config.stay_method == "twc":
        diagnostics = StayDiagnostics()
        stays = extract_stays_twc(traj, stay_params(config), diagnostics)
        extra["out_of_radius_admissions"] = diagnostics.out_of_radius_admissions
    else:
        stays = EXTRACTORS[config.stay_method](traj, stay_params(config))
    write_stays(out, stays, traj.origin)
    manifest = stays_manifest_path(out)
    write_stays_manifest(manifest, stays)
    write_sidecar(out, "extract-stays", config.as_dict(), {"trajectory": digest},
                  method=config.stay_method, stats=stay_stats(stays), manifest=os.path.basename(manifest), **extra)
    return {"stays": out, "manifest": manifest, **stay_stats(stays)}


def run_extract_destinations(stays_path: str, traj_path: str, out: str, config: PipelineConfig):
    traj, digest = _load_trajectory(traj_path)
    check_input(stays_path, "trajectory", digest)
    stays = load_stays(stays_path, traj)
    params = merge_params(config)
    destinations = extract_destinations(stays, params, config.destination_method)
    extra = {}
    if config.destination_method == "optics":
        extra["optics_ordering"] = [
            [sid, None if r is None else round_number(r)] for sid, r in optics_ordering(stays, params)]
    write_destinations(out, destinations, stays, traj.origin, config.destination_method,
                       method_parameters(params, config.destination_method))
    write_sidecar(out, "extract-destinations", config.as_dict(),
                  {"trajectory": digest, "stays": file_digest(stays_path)},
                  method=config.destination_method, stats=destination_stats(destinations), **extra)
    return {"destinations": out, **destination_stats(destinations)}


def run_partition(dest_path: str, traj_path: str, out: str, config: PipelineConfig):
    traj, digest = _load_trajectory(traj_path)
    check_input(dest_path, "trajectory", digest)
    destinations = load_destinations(dest_path, traj)
    _, goi, grid = partition_trajectory(traj, destinations, config.cell_size, config.metric)

    folder = os.path.dirname(out) or "."
    goi_path = os.path.join(folder, "goi_grid.geojson")
    report_path = os.path.join(folder, "partition_report.json")
    inputs = {"trajectory": digest, "destinations": file_digest(dest_path)}
    write_goi_grid(goi_path, goi, traj.origin)
    write_sidecar(goi_path, "partition", config.as_dict(), inputs)
    write_final_grid(out, grid, traj.origin)
    write_sidecar(out, "partition", config.as_dict(), inputs, cell_size=config.cell_size, metric=config.metric,
                  labels={"goi": "source destination id", "filler": "cell id"})
    # the labeler reads the written grid, so that is the one to check
    report = validate_partition(load_final_grid(out)[0], traj)
    write_report(report_path, {k: round_number(v) if isinstance(v, float) else v
                               for k, v in report.as_dict().items()})
    if not report.passed:
        raise PartitionError("final grid failed validation", report=report_path)
    return {"grid": out, "goi_grid": goi_path, "report": report_path,
            "cells": len(grid), "gois": len(goi.gois), "labeled_micro_cells": goi.labeled_count}


def run_label(in_path: str, traj_path: str, out: str, config: PipelineConfig):
    traj, digest = _load_trajectory(traj_path)
    check_input(in_path, "trajectory", digest)
    if config.label_strategy == "nnq":
        entries = label_by_nnq(traj, load_destinations(in_path, traj), config.collapse)
    else:
        grid, _ = load_final_grid(in_path)
        entries = label_by_intersection(traj, grid, config.collapse)
    write_svl(out, entries)
    write_sidecar(out, "label", config.as_dict(), {"trajectory": digest, "source": file_digest(in_path)},
                  strategy=config.label_strategy)
    return {"svl": out, "entries": len(entries)}


def run_synth(out_dir: str, spec: ScenarioSpec):
    scenario = simulate(spec)
    traj_path = os.path.join(out_dir, "trajectory.csv")
    truth_path = os.path.join(out_dir, "truth.geojson")
    export_trajectory_csv(traj_path, scenario.trajectory)
    write_truth(truth_path, scenario.truth, scenario.trajectory.origin)
    spec_record = asdict(spec)
    write_sidecar(traj_path, "synth", spec_record, {}, visits=[
        {"goi": v.goi_id, "arrival": v.arrival, "departure": v.departure} for v in scenario.visits])
    write_sidecar(truth_path, "synth", spec_record, {"trajectory": file_digest(traj_path)})
    return {"trajectory": traj_path, "truth": truth_path, "fixes": len(scenario.trajectory)}


def run_evaluate(args, config: PipelineConfig, spec: ScenarioSpec):
    if args.batch:
        seeds = [spec.seed + k for k in range(args.batch)]
        scenarios = []
        for seed in seeds:
            s = simulate(replace(spec, seed=seed))
            scenarios.append((seed, s.trajectory, s.truth))
        report = evaluation_report(compare_methods(scenarios, config), config)
        write_report(args.out, report)
        return {"report": args.out, "scenarios": len(seeds)}

    if not args.trajectory:
        raise GoiPartitionError("evaluate needs --batch N or --trajectory")
    traj, digest = _load_trajectory(args.trajectory)
    truth = load_truth(args.truth, traj.origin) if args.truth else None
    report = evaluation_report(compare_methods([(None, traj, truth)], config), config)
    report["trajectory"] = digest
    if args.inp:
        if truth is None:
            raise GoiPartitionError("scoring --in needs --truth")
        data, origin = read_feature_collection(args.inp)
        estimated = [reframe(shape(f["geometry"]), origin, traj.origin) for f in data["features"]]
        report["scored_input"] = {"path": args.inp,
                                  "geometric_similarity": round_number(geometric_similarity(truth, estimated))}
    write_report(args.out, report)
    return {"report": args.out}


def run_pipeline(args, config: PipelineConfig, spec: ScenarioSpec):
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    summary: Dict[str, dict] = {}
    traj_path, truth_path = args.inp, args.truth
    if not traj_path:
        summary["synth"] = run_synth(out_dir, spec)
        traj_path, truth_path = summary["synth"]["trajectory"], summary["synth"]["truth"]

    stays_path = os.path.join(out_dir, "stays.geojson")
    dest_path = os.path.join(out_dir, "destinations.geojson")
    grid_path = os.path.join(out_dir, "grid.geojson")
    svl_path = os.path.join(out_dir, "svl.csv")
    summary["extract-stays"] = run_extract_stays(traj_path, stays_path, config)
    summary["extract-destinations"] = run_extract_destinations(stays_path, traj_path, dest_path, config)
    summary["partition"] = run_partition(dest_path, traj_path, grid_path, config)
    label_source = dest_path if config.label_strategy == "nnq" else grid_path
    summary["label"] = run_label(label_source, traj_path, svl_path, config)

    if truth_path:
        traj = load_trajectory_csv(traj_path)
        truth = load_truth(truth_path, traj.origin)
        data, origin = read_feature_collection(summary["partition"]["goi_grid"])
        gois = [reframe(shape(f["geometry"]), origin, traj.origin) for f in data["features"]]
        report_path = os.path.join(out_dir, "evaluation.json")
        write_report(report_path, {
            "parameters": config.as_dict(),
            "trajectory": file_digest(traj_path),
            "truth": file_digest(truth_path),
            "geometric_similarity": round_number(geometric_similarity(truth, gois)),
            "stays": read_sidecar(stays_path)["stats"],
            "destinations": read_sidecar(dest_path)["stats"],
        })
        summary["evaluate"] = {"report": report_path}
    return summary


def _add_parameters(p):
    p.add_argument("--config", help="flat key=value file overriding the defaults")
    p.add_argument("--log-file", help="also write log records to this file")
    p.add_argument("--t-min", type=int)
    p.add_argument("--d-max", type=float)
    p.add_argument("--diam-max", type=float)
    p.add_argument("--buffer", type=float)
    p.add_argument("--j-min", type=float)
    p.add_argument("--f-min", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", type=int)
    p.add_argument("--diameter-min", type=float)
    p.add_argument("--cell-size", type=float)
    p.add_argument("--metric", choices=("GS", "PCS"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goi-partition", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-stays", help="trajectory CSV -> stays GeoJSON")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", dest="stay_method", choices=("twc", "refpoint", "diameter"))
    _add_parameters(p)

    p = sub.add_parser("extract-destinations", help="stays GeoJSON -> destinations GeoJSON")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", dest="destination_method", choices=("geometric", "optics", "diameter"))
    _add_parameters(p)

    p = sub.add_parser("partition", help="destinations -> final grid, GOI grid and validation report")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    _add_parameters(p)

    p = sub.add_parser("label", help="final grid (or destinations for nnq) -> SVL")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", dest="label_strategy", choices=("intersection", "nnq"))
    p.add_argument("--collapse", action="store_true", default=None)
    _add_parameters(p)

    p = sub.add_parser("evaluate", help="score GOIs against ground truth or compare methods on a batch")
    p.add_argument("--in", dest="inp", help="GOI GeoJSON to score against --truth")
    p.add_argument("--trajectory")
    p.add_argument("--truth")
    p.add_argument("--batch", type=int, help="compare methods on N seeded scenarios")
    p.add_argument("--scenario", help="flat key=value scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    _add_parameters(p)

    p = sub.add_parser("synth", help="seeded scenario -> trajectory CSV + truth GeoJSON")
    p.add_argument("--scenario", help="flat key=value scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--log-file")

    p = sub.add_parser("pipeline", help="run every stage; synthesises a scenario when --in is omitted")
    p.add_argument("--in", dest="inp")
    p.add_argument("--truth")
    p.add_argument("--scenario", help="flat key=value scenario file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--stay-method", choices=("twc", "refpoint", "diameter"))
    p.add_argument("--destination-method", choices=("geometric", "optics", "diameter"))
    p.add_argument("--strategy", dest="label_strategy", choices=("intersection", "nnq"))
    p.add_argument("--collapse", action="store_true", default=None)
    _add_parameters(p)
    return parser


_CONFIG_FLAGS = ("t_min", "d_max", "diam_max", "buffer", "j_min", "f_min", "eps", "min_pts", "diameter_min",
                 "cell_size", "metric", "stay_method", "destination_method", "label_strategy", "collapse")


def _config(args):
    overrides = {name: getattr(args, name, None) for name in _CONFIG_FLAGS}
    return load_config(getattr(args, "config", None), overrides)


def _scenario(args):
    raw = read_flat_config(args.scenario) if getattr(args, "scenario", None) else {}
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    return ScenarioSpec.from_mapping(raw)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "log_file", None):
        attach_file_handler(args.log_file)

    try:
        if args.command == "synth":
            os.makedirs(args.out, exist_ok=True)
            result = run_synth(args.out, _scenario(args))
        else:
            config = _config(args)
            logger.info(f"{args.command}: {json.dumps(config.as_dict(), sort_keys=True)}")
            if args.command == "extract-stays":
                result = run_extract_stays(args.inp, args.out, config)
            elif args.command == "extract-destinations":
                result = run_extract_destinations(args.inp, args.trajectory, args.out, config)
            elif args.command == "partition":
                result = run_partition(args.inp, args.trajectory, args.out, config)
            elif args.command == "label":
                result = run_label(args.inp, args.trajectory, args.out, config)
            elif args.command == "evaluate":
                result = run_evaluate(args, config, _scenario(args))
            else:
                result = run_pipeline(args, config, _scenario(args))
    except GoiPartitionError as e:
        logger.error(f"{args.command} failed: {e}")
        print(json.dumps(e.to_record(), sort_keys=True, default=str), file=sys.stderr)
        return 2
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        print(json.dumps({"error": type(e).__name__, "message": str(e), "path": e.filename},
                         sort_keys=True, default=str), file=sys.stderr)
        return 2

    print(json.dumps(result, sort_keys=True, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
