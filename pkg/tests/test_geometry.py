import math

import numpy as np
import pytest

from deflect.geometry import (
    ANGLE_EPS,
    MIN_ARC_WIDTH,
    TWO_PI,
    DegenerateGeometryError,
    Point,
    Sector,
    angular_distance_to_bounds,
    ccw_delta,
    circular_distance,
    euclid_dist,
    merge_sectors,
    minimal_covering_arc,
    normalize_angle,
    oriented_angle,
    sector_contains,
    sector_from_line,
    sector_to_line,
    try_merge,
)

PI = math.pi


# ---------------------------------------------------------------- oracles

def _quadrant_angle(origin, target):
    """Angle via acos plus explicit quadrant handling; independent of atan2."""
    dx = target[0] - origin[0]
    dy = target[1] - origin[1]
    r = math.sqrt(dx * dx + dy * dy)
    base = math.acos(max(-1.0, min(1.0, dx / r)))
    return base if dy >= 0 else TWO_PI - base


def _arc_contains_oracle(amin, amax, a):
    """Unnormalized-interval membership: unwrap the arc, test a and a + 2*pi."""
    hi = amax if amax > amin else amax + TWO_PI
    for cand in (a, a + TWO_PI):
        if amin - ANGLE_EPS <= cand <= hi + ANGLE_EPS:
            return True
    return False


def _circ_dist_oracle(a, b):
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def _sector_contains_oracle(s, apex, p):
    d = euclid_dist(apex, p)
    if d == 0.0 or d < s.d_min:
        return False
    if s.angle_min == s.angle_max:
        return True
    return _arc_contains_oracle(s.angle_min, s.angle_max, oriented_angle(apex, p))


# ---------------------------------------------------------------- distances

def test_euclid_dist_identity():
    assert euclid_dist(Point(0, 0), Point(0, 0)) == 0.0


def test_euclid_dist_345():
    assert euclid_dist(Point(0, 0), Point(3, 4)) == 5.0


def test_euclid_dist_hand_value():
    # sqrt(9 + 16)
    assert euclid_dist(Point(1, 1), Point(-2, 5)) == 5.0


def test_euclid_dist_symmetric():
    rng = np.random.default_rng(7)
    for _ in range(200):
        p = Point(*rng.uniform(-10, 10, 2))
        q = Point(*rng.uniform(-10, 10, 2))
        assert euclid_dist(p, q) == euclid_dist(q, p)
        assert euclid_dist(p, q) >= 0.0


# ---------------------------------------------------------------- angles

def test_oriented_angle_axes():
    assert oriented_angle(Point(0, 0), Point(1, 0)) == 0.0
    assert oriented_angle(Point(0, 0), Point(0, 2)) == pytest.approx(PI / 2)


def test_oriented_angle_third_quadrant():
    assert oriented_angle(Point(0, 0), Point(-1, -1)) == pytest.approx(5 * PI / 4)


def test_oriented_angle_coincident_raises():
    with pytest.raises(DegenerateGeometryError):
        oriented_angle(Point(1, 2), Point(1, 2))


def test_oriented_angle_matches_quadrant_oracle():
    rng = np.random.default_rng(11)
    for _ in range(500):
        o = Point(*rng.uniform(-5, 5, 2))
        t = Point(*rng.uniform(-5, 5, 2))
        if o == t:
            continue
        a = oriented_angle(o, t)
        assert 0.0 <= a < TWO_PI
        assert a == pytest.approx(_quadrant_angle(o, t), abs=1e-12)


def test_normalize_angle_closure():
    rng = np.random.default_rng(13)
    for raw in rng.uniform(-50, 50, 1000):
        a = normalize_angle(float(raw))
        assert 0.0 <= a < TWO_PI
    assert normalize_angle(-1e-20) == 0.0
    assert normalize_angle(TWO_PI) == 0.0


def test_circular_distance_against_oracle():
    rng = np.random.default_rng(17)
    for _ in range(500):
        a, b = rng.uniform(0, TWO_PI, 2)
        assert circular_distance(a, b) == pytest.approx(_circ_dist_oracle(a, b), abs=1e-12)


# ---------------------------------------------------------------- sectors

def test_sector_normalizes_bounds():
    s = Sector(-PI / 2, 5 * TWO_PI / 2 + 0.5, 1.0)
    assert 0.0 <= s.angle_min < TWO_PI
    assert 0.0 <= s.angle_max < TWO_PI


def test_sector_rejects_bad_dmin():
    with pytest.raises(ValueError):
        Sector(0.0, 1.0, -1.0)
    with pytest.raises(ValueError):
        Sector(0.0, 1.0, math.nan)


def test_sector_full_circle_encoding():
    s = Sector(1.0, 1.0, 2.0)
    assert s.is_full()
    assert s.width == TWO_PI
    assert sector_contains(s, Point(0, 0), Point(-3, 0))
    assert not sector_contains(s, Point(0, 0), Point(-1, 0))  # below d_min


def test_sector_contains_basic():
    s = Sector(0.0, PI / 2, 1.0)
    assert sector_contains(s, Point(0, 0), Point(2, 2))
    assert not sector_contains(s, Point(0, 0), Point(0.5, 0.5))  # dist 0.707 < 1


def test_sector_contains_wrap():
    s = Sector(7 * PI / 4, PI / 4, 0.0)
    assert sector_contains(s, Point(0, 0), Point(1, -0.1))


def test_sector_contains_apex_point():
    assert not sector_contains(Sector(0.0, PI, 0.0), Point(1, 1), Point(1, 1))
    assert not sector_contains(Sector(0.0, PI, 2.0), Point(1, 1), Point(1, 1))


def test_sector_contains_distance_boundary():
    s = Sector(0.0, PI, 5.0)
    assert sector_contains(s, Point(0, 0), Point(0, 5.0))
    assert not sector_contains(s, Point(0, 0), Point(0, 4.9999))


def test_sector_contains_matches_oracle_bulk():
    rng = np.random.default_rng(19)
    apex = Point(0.0, 0.0)
    for _ in range(200):
        s = Sector(rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI), rng.uniform(0, 2))
        for _ in range(50):
            p = Point(*rng.uniform(-3, 3, 2))
            assert sector_contains(s, apex, p) == _sector_contains_oracle(s, apex, p)


# ------------------------------------------------- angular distance to bounds

def test_angular_distance_on_bound():
    assert angular_distance_to_bounds(Sector(0.0, PI / 2, 0.0), 0.0) == 0.0


def test_angular_distance_equidistant():
    assert angular_distance_to_bounds(Sector(0.0, PI / 2, 0.0), PI) == pytest.approx(PI / 2)


def test_angular_distance_wrap_case():
    assert angular_distance_to_bounds(Sector(3 * PI / 2, PI / 2, 0.0), PI / 4) == pytest.approx(PI / 4)


def test_angular_distance_grid_oracle():
    s = Sector(3 * PI / 2, PI / 2, 0.0)
    for a in np.linspace(0.0, TWO_PI, 721, endpoint=False):
        expect = min(_circ_dist_oracle(a, s.angle_min), _circ_dist_oracle(a, s.angle_max))
        assert angular_distance_to_bounds(s, float(a)) == pytest.approx(expect, abs=1e-12)


# ---------------------------------------------------------------- merging

def test_try_merge_overlap_equal_dmin():
    m = try_merge(Sector(0, PI / 4, 5.0), Sector(PI / 8, PI / 2, 5.0), 0.0)
    assert m == Sector(0.0, PI / 2, 5.0)


def test_try_merge_refuses_dmin_gap():
    assert try_merge(Sector(0, PI / 4, 5.0), Sector(PI / 8, PI / 2, 9.0), 1.0) is None


def test_try_merge_wrap():
    m = try_merge(Sector(7 * PI / 4, 0.0, 5.0), Sector(0.0, PI / 4, 5.5), 1.0)
    assert m is not None
    assert m.angle_min == pytest.approx(7 * PI / 4)
    assert m.angle_max == pytest.approx(PI / 4)
    assert m.d_min == 5.0


def test_try_merge_touching_arcs():
    m = try_merge(Sector(0.0, PI / 4, 1.0), Sector(PI / 4, PI / 2, 1.0), 0.0)
    assert m == Sector(0.0, PI / 2, 1.0)


def test_try_merge_disjoint():
    assert try_merge(Sector(0.0, PI / 4, 1.0), Sector(PI, 3 * PI / 2, 1.0), 10.0) is None


def test_try_merge_full_circle_absorbs():
    full = Sector(1.0, 1.0, 3.0)
    m = try_merge(full, Sector(0.0, PI, 2.5), 1.0)
    assert m is not None and m.is_full() and m.d_min == 2.5


def test_try_merge_union_to_full_circle():
    m = try_merge(Sector(0.0, PI, 1.0), Sector(PI, 0.0, 1.0), 0.0)
    assert m is not None and m.is_full()


def _random_sector(rng, d_min=None):
    a = rng.uniform(0, TWO_PI)
    w = rng.uniform(1e-4, TWO_PI - 1e-4)
    d = rng.uniform(0, 2) if d_min is None else d_min
    return Sector(a, normalize_angle(a + w), d)


def test_merge_soundness_sampled():
    # Any point in either input must be in the merged sector.
    rng = np.random.default_rng(23)
    apex = Point(0.0, 0.0)
    merged_pairs = 0
    while merged_pairs < 100:
        s1 = _random_sector(rng)
        s2 = _random_sector(rng, d_min=s1.d_min + rng.uniform(-0.1, 0.1))
        m = try_merge(s1, s2, 0.2)
        if m is None:
            continue
        merged_pairs += 1
        for _ in range(100):
            p = Point(*rng.uniform(-3, 3, 2))
            if sector_contains(s1, apex, p) or sector_contains(s2, apex, p):
                assert sector_contains(m, apex, p)


def test_merge_minimality_on_arcs():
    rng = np.random.default_rng(29)
    checked = 0
    while checked < 200:
        s1 = _random_sector(rng, d_min=1.0)
        s2 = _random_sector(rng, d_min=1.0)
        m = try_merge(s1, s2, 0.0)
        if m is None:
            continue
        checked += 1
        if s1.width + s2.width < TWO_PI:
            assert m.width <= s1.width + s2.width + 1e-9


def test_merge_sectors_single_unchanged():
    s = Sector(0.1, 0.7, 2.0)
    assert merge_sectors([s], 0.5) == [s]


def test_merge_sectors_keeps_dmin_gap_pair():
    # Overlapping arcs whose minimal distances differ beyond the tolerance
    # must both survive, or nearer reachable destinations would be claimed.
    s1 = Sector(0.0, PI / 2, 2.0)
    s2 = Sector(PI / 4, PI, 7.0)
    out = merge_sectors([s1, s2], 1.0)
    assert sorted(out, key=lambda s: s.d_min) == [s1, s2]


def test_merge_sectors_fixpoint_matches_closure_oracle():
    # Equal d_min so the closure is order-insensitive; compare against an
    # any-order exhaustive closure.
    rng = np.random.default_rng(31)
    for _ in range(50):
        sectors = [_random_sector(rng, d_min=1.0) for _ in range(10)]
        result = merge_sectors(sectors, 0.0)

        work = list(sectors)
        progress = True
        while progress:
            progress = False
            order = rng.permutation(len(work))
            for ii in order:
                for jj in order:
                    if ii >= jj or progress:
                        continue
                    m = try_merge(work[ii], work[jj], 0.0)
                    if m is not None:
                        pair = sorted((ii, jj), reverse=True)
                        for idx in pair:
                            del work[idx]
                        work.append(m)
                        progress = True
        key = lambda s: (s.angle_min, s.angle_max, s.d_min)
        assert sorted(result, key=key) == sorted(work, key=key)
        # no mergeable pair remains
        for i in range(len(result)):
            for j in range(i + 1, len(result)):
                assert try_merge(result[i], result[j], 0.0) is None


def test_merge_sectors_order_independent():
    rng = np.random.default_rng(37)
    sectors = [_random_sector(rng, d_min=1.0) for _ in range(8)]
    a = merge_sectors(sectors, 0.0)
    b = merge_sectors(list(reversed(sectors)), 0.0)
    assert a == b


# ---------------------------------------------------------------- misc

def test_minimal_covering_arc_simple():
    start, width = minimal_covering_arc([0.1, 0.5, 0.3])
    assert start == pytest.approx(0.1)
    assert width == pytest.approx(0.4)


def test_minimal_covering_arc_wraps_zero():
    start, width = minimal_covering_arc([TWO_PI - 0.2, 0.1])
    assert start == pytest.approx(TWO_PI - 0.2)
    assert width == pytest.approx(0.3)


def test_minimal_covering_arc_single_and_equal():
    assert minimal_covering_arc([1.0]) == (1.0, 0.0)
    start, width = minimal_covering_arc([2.0, 2.0, 2.0])
    assert start == 2.0 and width == 0.0


def test_minimal_covering_arc_covers_all_inputs():
    rng = np.random.default_rng(41)
    for _ in range(200):
        angles = [float(a) for a in rng.uniform(0, TWO_PI, rng.integers(2, 9))]
        start, width = minimal_covering_arc(angles)
        for a in angles:
            assert ccw_delta(start, a) <= width + 1e-9


def test_sector_line_roundtrip():
    rng = np.random.default_rng(43)
    for _ in range(100):
        s = _random_sector(rng)
        assert sector_from_line(sector_to_line(s)) == s


def test_width_constants_sane():
    assert 0 < MIN_ARC_WIDTH < 1e-4
    assert Sector(0.0, MIN_ARC_WIDTH, 0.0).width == pytest.approx(MIN_ARC_WIDTH)
