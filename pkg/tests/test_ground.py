import random

import pytest
from hypothesis import given, settings, strategies as st

from orbitsched.geometry import Box, ConvexPolygon, GeometryError
from orbitsched.ground import (
    Capture,
    FilterReport,
    FilterStats,
    Query,
    QueryIndex,
    aoi_match,
    build_formula,
    expand_entries,
    generate_schedule,
    generate_schedule_bruteforce,
    load_queries,
    merge_slots,
    save_queries,
    update_filter_stats,
)

from conftest import F

CLOUD_FREE, FLOOD, NEAR_CITY = 1, 2, 3


def q(id, filters, aoi, prio, ls=True):
    return Query(id, tuple(filters), tuple(aoi), prio, ls)


def test_empty_query_set_gives_empty_schedule():
    plan = [Capture(t, 0.0, 0.0) for t in range(3)]
    assert generate_schedule(plan, [], 2) == []


def test_consecutive_locations_merge():
    query = q("a", [1], [Box(-1, 1, -1, 1)], 3)
    plan = [Capture(t, 0.0, 0.1 * t) for t in range(3)]
    entries = generate_schedule(plan, [query], 2)
    assert len(entries) == 1 and entries[0].locs == (0, 1, 2)


def test_overlapping_queries_share_filters():
    region = [Box(-1, 1, -1, 1)]
    qs = [q("flood", [CLOUD_FREE, FLOOD], region, 3), q("city", [CLOUD_FREE, FLOOD, NEAR_CITY], region, 5)]
    (entry,) = generate_schedule([Capture(0, 0, 0)], qs, 2)
    assert entry.formula == F(({1, 2}, 3), ({1, 2, 3}, 5))


def test_p_star_drops_low_priority_terms():
    region = [Box(-1, 1, -1, 1)]
    qs = [q("lo", [1], region, 2), q("hi", [2], region, 4)]
    assert build_formula(qs, 3) == F(({2}, 4))
    assert build_formula([qs[0]], 3) is None


def test_non_latency_sensitive_and_priority_one_excluded():
    region = [Box(-1, 1, -1, 1)]
    assert build_formula([q("a", [1], region, 5, ls=False), q("b", [2], region, 1)], 2) is None


def test_unmatched_locations_produce_no_entry():
    query = q("a", [1], [Box(-1, 1, -1, 1)], 3)
    plan = [Capture(0, 0, 0), Capture(1, 50, 50), Capture(2, 0, 0)]
    entries = generate_schedule(plan, [query], 2)
    assert expand_entries(entries).keys() == {0, 2}


def test_point_outside_and_on_boundary():
    qs = [q("a", [1], [Box(0, 10, 0, 10)], 3)]
    assert aoi_match(20.0, 20.0, qs) == frozenset()
    assert aoi_match(10.0, 5.0, qs) == {"a"}
    assert aoi_match(0.0, 0.0, qs) == {"a"}


def test_antimeridian_box():
    b = Box.around(0.0, 179.0, 1.0, 2.0)
    qs = [q("w", [1], [b], 3)]
    assert aoi_match(0.0, -179.5, qs) == {"w"}
    assert aoi_match(0.0, 178.0, qs) == {"w"}
    assert aoi_match(0.0, 170.0, qs) == frozenset()


def test_polygon_validation_and_containment():
    tri = ConvexPolygon([(0, 0), (0, 10), (10, 0)])
    assert tri.contains(1, 1) and tri.contains(5, 5) and not tri.contains(6, 6)
    with pytest.raises(GeometryError):
        ConvexPolygon([(0, 0), (0, 10), (5, 5), (10, 10), (10, 0)])
    with pytest.raises(GeometryError):
        Box(10, 0, 0, 1)


def test_index_matches_linear_scan():
    rng = random.Random(0)
    queries = []
    for k in range(100):
        lat, lon = rng.uniform(-60, 60), rng.uniform(-180, 180)
        if k % 5 == 0:
            region = ConvexPolygon([(lat, lon), (lat + 5, lon), (lat, min(180, lon + 5))])
        else:
            region = Box.around(lat, lon, rng.uniform(0.5, 15), rng.uniform(0.5, 15))
        queries.append(q(f"q{k}", [1 + k % 5], [region], 2 + k % 4))
    index = QueryIndex(queries)
    lats = [rng.uniform(-70, 70) for _ in range(1000)]
    lons = [rng.uniform(-180, 180) for _ in range(1000)]
    many = index.match_many(lats, lons)
    for la, lo, m in zip(lats, lons, many):
        lin = index.match_linear(la, lo)
        assert index.match(la, lo) == lin == m


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([2, 3, 4, 5]))
def test_schedule_matches_bruteforce(seed, p_star):
    rng = random.Random(seed)
    queries = [q(f"q{k}", rng.sample(range(1, 8), rng.randint(1, 3)),
                 [Box.around(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.5, 4), rng.uniform(0.5, 4))],
                 rng.randint(1, 5), rng.random() < 0.9) for k in range(rng.randint(0, 8))]
    plan = [Capture(t, rng.uniform(-8, 8), rng.uniform(-8, 8)) for t in range(rng.randint(0, 40))]
    entries = generate_schedule(plan, queries, p_star)
    assert expand_entries(entries) == generate_schedule_bruteforce(plan, queries, p_star)
    for e in entries:
        assert all(t.priority >= p_star for t in e.formula.terms)
    for a, b in zip(entries, entries[1:]):
        assert a.formula != b.formula or any(
            i not in expand_entries(entries) for i in range(a.locs[-1] + 1, b.locs[0]))


def test_merge_skips_gaps():
    f = F(({1}, 3))
    assert [e.locs for e in merge_slots([f, None, f, F(({2}, 3)), f])] == [(0, 2), (3,), (4,)]


def test_filter_stats_examples():
    stats = FilterStats({1: 0.5})
    assert update_filter_stats(stats, [FilterReport(1, 100, 0)]).pass_prob[1] < 0.05
    assert update_filter_stats(stats, []) is stats
    assert update_filter_stats(stats, [FilterReport(1, 100, 50)]).pass_prob[1] == pytest.approx(0.5)
    assert update_filter_stats(stats, [FilterReport(1, 0, 0)]) is stats


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.integers(1, 500), st.data())
def test_filter_stats_monotone_in_pass_fraction(prior, n, data):
    k1 = data.draw(st.integers(0, n))
    k2 = data.draw(st.integers(k1, n))
    stats = FilterStats({1: prior})
    a = update_filter_stats(stats, [FilterReport(1, n, k1)]).pass_prob[1]
    b = update_filter_stats(stats, [FilterReport(1, n, k2)]).pass_prob[1]
    assert 0.0 <= a <= b <= 1.0


def test_query_file_round_trip(tmp_path):
    qs = [q("a", [1, 2], [Box(0, 1, 2, 3), ConvexPolygon([(0, 0), (0, 1), (1, 0)])], 4),
          q("b", [3], [Box(-5, 5, 170, -170)], 2, ls=False)]
    path = tmp_path / "queries.json"
    save_queries(qs, path)
    assert load_queries(path) == qs
    stats = FilterStats({1: 0.25, 2: 0.5}, {1: 0.9})
    assert FilterStats.from_dict(stats.to_dict()) == stats
