"""Literal, index-free re-implementation of the three stay extractors.

Everything is recomputed from scratch at every step (centroids, diameters),
which makes it slow but easy to check against the pseudocode. Tests compare
its stay boundaries with the production extractors.
"""

from itertools import combinations
from typing import List

from src.errors import ConfigError, OracleSizeError
from src.stay_extraction import Stay, StayParams, make_stay
from src.trajectory import Trajectory, time_weighted_centroid
from utils.geometry import euclidean_distance

MAX_ORACLE_POINTS = 2000


def _diameter(points) -> float:
    return max((euclidean_distance(a.p, b.p) for a, b in combinations(points, 2)), default=0.0)


def _twc(traj: Trajectory, params: StayParams) -> List[Stay]:
    P = traj.points
    S: List[Stay] = []
    i = 0
    while i < len(P):
        ps = [P[i]]
        twc = time_weighted_centroid(ps)
        j = i + 1
        token = 0
        while j < len(P):
            dd = euclidean_distance(twc, P[j].p)
            if dd > params.d_max:
                dt = (P[j].t + P[j].tv) - P[i].t
                if dt >= params.t_min:
                    S.append(make_stay(len(S), traj, i, j - 1, P[i].t, P[j].t + P[j].tv, params.buffer_width))
                    i = j
                    token = 1
                    break
            ps.append(P[j])
            twc = time_weighted_centroid(ps)
            j += 1
        if token != 1:
            i += 1
    return S


def _baseline(traj: Trajectory, params: StayParams, by_diameter: bool) -> List[Stay]:
    P = traj.points
    S: List[Stay] = []
    i = 0
    while i < len(P):
        ps = [P[i]]
        j = i + 1
        broke = False
        while j < len(P):
            if by_diameter:
                outside = _diameter(ps + [P[j]]) > params.diam_max
            else:
                outside = euclidean_distance(P[i].p, P[j].p) > params.d_max
            if outside:
                broke = True
                break
            ps.append(P[j])
            j += 1
        if broke and len(ps) >= 2 and P[j].t - P[i].t >= params.t_min:
            S.append(make_stay(len(S), traj, i, j - 1, P[i].t, P[j].t, params.buffer_width))
            i = j
        else:
            i += 1
    return S


def brute_force_stay_oracle(traj: Trajectory, params: StayParams, method: str) -> List[Stay]:
    if len(traj) > MAX_ORACLE_POINTS:
        raise OracleSizeError(
            f"oracle limited to {MAX_ORACLE_POINTS} points, got {len(traj)}", points=len(traj))
    if method == "twc":
        return _twc(traj, params)
    if method == "refpoint":
        return _baseline(traj, params, by_diameter=False)
    if method == "diameter":
        return _baseline(traj, params, by_diameter=True)
    raise ConfigError(f"unknown stay extraction method {method!r}", key="stay_method")
