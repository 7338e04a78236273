from dataclasses import replace
from itertools import combinations

import numpy as np
import pytest
import shapely

from factories import stay_from_region
from src.destinations import (
    MergeParams, extract_destinations, merge_diameter, merge_geometric_similarity, optics_cluster,
    optics_ordering,
)
from src.errors import ConfigError
from src.stay_extraction import StayParams, extract_stays
from src.synthetic import BENCHMARK_SCENARIO, BENCHMARK_SEEDS, generate_scenario
from utils.geometry import intersection_area, jaccard, union


def _params(**overrides):
    values = dict(j_min=0.10, f_min=1, eps=100.0, min_pts=3, diameter_min=200.0)
    values.update(overrides)
    return MergeParams(**values)


def _random_stays(rng, count, spread=200.0):
    stays = []
    for k in range(count):
        x, y = rng.uniform(0, spread, size=2)
        w, h = rng.uniform(10, 80, size=2)
        stays.append(stay_from_region(k, shapely.box(x, y, x + w, y + h)))
    return stays


def _agglomerate(stays, j_min):
    """All-pairs agglomeration without an index: merge the best pair while it beats j_min."""
    clusters = {s.id: (s.g, [s.id]) for s in stays}
    while len(clusters) > 1:
        scored = [(-jaccard(clusters[a][0], clusters[b][0]), (a, b)) for a, b in combinations(sorted(clusters), 2)]
        neg_sim, (a, b) = min(scored)
        if not -neg_sim > j_min:
            break
        ga, ma = clusters[a]
        gb, mb = clusters.pop(b)
        clusters[a] = (union(ga, gb), ma + mb)
    return {cid: sorted(members) for cid, (_, members) in clusters.items()}


def test_params_validation():
    with pytest.raises(ConfigError):
        _params(j_min=1.5)
    with pytest.raises(ConfigError):
        _params(f_min=0)
    with pytest.raises(ConfigError):
        _params(min_pts=1)
    with pytest.raises(ConfigError):
        _params(eps=0)


def test_overlapping_pair_merges_and_keeps_smallest_id(box_stay):
    stays = [box_stay(3, 0, 0, 10, 10), box_stay(5, 2, 0, 12, 10), box_stay(9, 100, 100, 110, 110)]
    dests = merge_geometric_similarity(stays, _params())
    assert [(d.id, d.members, d.frequency) for d in dests] == [(3, (3, 5), 2), (9, (9,), 1)]
    assert dests[0].geometry.area == pytest.approx(120.0)
    assert [pt.t for pt in dests[0].points] == sorted(pt.t for pt in dests[0].points)


def test_weak_overlap_stays_apart(box_stay):
    # Jaccard 1/19, below j_min
    stays = [box_stay(0, 0, 0, 10, 10), box_stay(1, 9, 0, 19, 10)]
    assert len(merge_geometric_similarity(stays, _params())) == 2
    assert len(merge_geometric_similarity(stays, _params(j_min=0.0))) == 1


def test_frequency_filter(box_stay):
    stays = [box_stay(0, 0, 0, 10, 10), box_stay(1, 0, 0, 10, 10), box_stay(2, 50, 50, 60, 60)]
    dests = merge_geometric_similarity(stays, _params(f_min=2))
    assert [d.id for d in dests] == [0]
    assert len(merge_geometric_similarity(stays, _params(f_min=2), apply_frequency_filter=False)) == 2


def test_empty_input():
    assert merge_geometric_similarity([], _params()) == []
    assert optics_cluster([], _params()) == []
    assert merge_diameter([], _params()) == []


def test_j_min_one_returns_the_stays_unchanged():
    rng = np.random.default_rng(1)
    for _ in range(20):
        stays = _random_stays(rng, 10)
        dests = merge_geometric_similarity(stays, _params(j_min=1.0))
        assert [d.id for d in dests] == [s.id for s in stays]
        for d, s in zip(dests, stays):
            assert shapely.equals_exact(d.geometry, s.g, 0.0)


def test_j_min_zero_gives_disjoint_destinations():
    rng = np.random.default_rng(2)
    for _ in range(20):
        dests = merge_geometric_similarity(_random_stays(rng, 12), _params(j_min=0.0))
        for a, b in combinations(dests, 2):
            assert intersection_area(a.geometry, b.geometry) < 1e-6


@pytest.mark.parametrize("j_min", [0.0, 0.05, 0.10, 1.0])
def test_geometric_merge_matches_all_pairs_oracle(j_min):
    rng = np.random.default_rng(42)
    for _ in range(100):
        stays = _random_stays(rng, int(rng.integers(1, 13)))
        expected = _agglomerate(stays, j_min)
        dests = merge_geometric_similarity(stays, _params(j_min=j_min))
        assert {d.id: list(d.members) for d in dests} == expected


def test_higher_j_min_never_gives_fewer_destinations():
    rng = np.random.default_rng(3)
    for _ in range(30):
        stays = _random_stays(rng, 12)
        counts = [len(merge_geometric_similarity(stays, _params(j_min=j))) for j in (0.0, 0.05, 0.10)]
        assert counts == sorted(counts)


@pytest.mark.parametrize("j_min", [0.0, 0.10, 1.0])
def test_merging_conserves_visits_and_points(j_min):
    rng = np.random.default_rng(17)
    for _ in range(30):
        stays = _random_stays(rng, int(rng.integers(1, 13)))
        merged = merge_geometric_similarity(stays, _params(j_min=j_min), apply_frequency_filter=False)
        assert sum(d.frequency for d in merged) == len(stays)
        assert sorted(pt.t for d in merged for pt in d.points) == sorted(pt.t for s in stays for pt in s.ps)
        assert sorted(m for d in merged for m in d.members) == [s.id for s in stays]


def _stay_at(stay_id, x, y, half=5.0):
    return stay_from_region(stay_id, shapely.box(x - half, y - half, x + half, y + half))


def test_optics_finds_dense_groups_and_drops_noise():
    stays = []
    for g, (cx, cy) in enumerate([(0, 0), (1000, 0), (0, 1000)]):
        for k in range(4):
            stays.append(_stay_at(len(stays), cx + 10 * k, cy + 5 * (k % 2)))
    stays.append(_stay_at(len(stays), 3000, 3000))
    dests = optics_cluster(stays, _params(min_pts=3))
    assert [d.members for d in dests] == [(0, 1, 2, 3), (4, 5, 6, 7), (8, 9, 10, 11)]
    assert all(d.frequency == 4 for d in dests)


def test_optics_with_too_few_stays_is_all_noise():
    stays = [_stay_at(k, 10 * k, 0) for k in range(2)]
    assert optics_cluster(stays, _params(min_pts=3)) == []
    assert optics_ordering(stays, _params(min_pts=3)) == []


def test_optics_ordering_covers_every_stay():
    stays = [_stay_at(k, 10 * k, 0) for k in range(6)]
    ordering = optics_ordering(stays, _params(min_pts=3))
    assert sorted(sid for sid, _ in ordering) == list(range(6))
    # the first point in the ordering has no predecessor
    assert ordering[0][1] is None


def _diameter_oracle(stays, diameter_min):
    groups = {s.id: [s] for s in stays}

    def diameter(members):
        pts = np.array([(pt.p.x, pt.p.y) for s in members for pt in s.ps])
        return float(np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)).max())

    while len(groups) > 1:
        d, (a, b) = min((diameter(groups[a] + groups[b]), (a, b)) for a, b in combinations(sorted(groups), 2))
        if d > diameter_min:
            break
        groups[a] = groups[a] + groups.pop(b)
    return {gid: sorted(s.id for s in members) for gid, members in groups.items()}


@pytest.mark.parametrize("diameter_min", [50.0, 120.0, 200.0])
def test_diameter_merge_matches_all_pairs_oracle(diameter_min):
    rng = np.random.default_rng(8)
    for _ in range(50):
        stays = _random_stays(rng, int(rng.integers(1, 11)), spread=400.0)
        dests = merge_diameter(stays, _params(diameter_min=diameter_min))
        assert {d.id: list(d.members) for d in dests} == _diameter_oracle(stays, diameter_min)


def test_larger_diameter_min_never_gives_more_destinations():
    rng = np.random.default_rng(9)
    for _ in range(20):
        stays = _random_stays(rng, 10, spread=600.0)
        counts = [len(merge_diameter(stays, _params(diameter_min=d))) for d in (200.0, 300.0, 400.0)]
        assert counts == sorted(counts, reverse=True)


def test_dispatch():
    stays = [_stay_at(k, 10 * k, 0) for k in range(4)]
    assert extract_destinations(stays, _params(), "geometric") == merge_geometric_similarity(stays, _params())
    assert extract_destinations(stays, _params(), "diameter") == merge_diameter(stays, _params())
    assert len(extract_destinations(stays, _params(), "optics")) == 1
    with pytest.raises(ConfigError):
        extract_destinations(stays, _params(), "kmeans")


@pytest.fixture(scope="module")
def benchmark_stays():
    batch = []
    for seed in BENCHMARK_SEEDS:
        traj, _ = generate_scenario(replace(BENCHMARK_SCENARIO, seed=seed))
        batch.append({method: extract_stays(traj, StayParams(), method) for method in ("twc", "refpoint", "diameter")})
    return batch


def _counts(batch, method, merge, **settings):
    return [len(merge(stays[method], _params(**settings))) for stays in batch]


def test_destination_counts_follow_their_parameters_on_the_benchmark(benchmark_stays):
    by_j_min = [_counts(benchmark_stays, "twc", merge_geometric_similarity, j_min=j) for j in (0.0, 0.05, 0.10)]
    by_min_pts = [_counts(benchmark_stays, "refpoint", optics_cluster, min_pts=m) for m in (3, 6, 9)]
    by_diameter = [_counts(benchmark_stays, "diameter", merge_diameter, diameter_min=d) for d in (200.0, 300.0, 400.0)]

    # a stricter threshold stops the same merge sequence earlier, so these hold seed by seed
    for counts in zip(*by_j_min):
        assert list(counts) == sorted(counts)
    for counts in zip(*by_diameter):
        assert list(counts) == sorted(counts, reverse=True)

    j_means, pts_means, diameter_means = ([np.mean(c) for c in rows] for rows in (by_j_min, by_min_pts, by_diameter))
    assert j_means == sorted(j_means)
    assert pts_means == sorted(pts_means, reverse=True)
    assert diameter_means == sorted(diameter_means, reverse=True)
    assert pts_means[0] > 0
