import math

import numpy as np
import pytest

from atlas import geometry
from atlas.constellation import Constellation, parse_builtin
from atlas.error_engine import ml_detect
from atlas.errors import PreconditionError, TooLargeError
from atlas.geometry import (
    contains,
    contains_ball,
    extents,
    is_bounded,
    pair_distance,
    pep_region,
    point_extents,
    recession_direction,
    region_to_dict,
    sample_region,
    vertices,
    voronoi_region,
)

A16 = 1 / math.sqrt(10)


def test_bpsk_region(bpsk_c):
    region = voronoi_region(bpsk_c, 0)
    np.testing.assert_allclose(region.rows, [[-1.0]])
    np.testing.assert_allclose(region.offsets, [1.0])
    ext = extents(region)
    assert ext.d_min == pytest.approx(1.0)
    assert ext.d_max == math.inf
    assert not ext.bounded


def test_qam16_inner_region(qam16_c):
    region = voronoi_region(qam16_c, 5)
    assert is_bounded(region)
    assert vertices(region).shape == (4, 2)
    ext = extents(region)
    assert ext.d_min == pytest.approx(A16, rel=1e-9)
    assert ext.d_max == pytest.approx(math.sqrt(2) * A16, rel=1e-9)


def test_qam16_corner_is_unbounded(qam16_c):
    region = voronoi_region(qam16_c, 0)
    assert not is_bounded(region)
    d = recession_direction(region)
    assert d is not None
    assert np.linalg.norm(d) > 0
    assert np.all(region.rows @ d <= 1e-9)


def test_grid3_center(grid3_c):
    ext = extents(voronoi_region(grid3_c, 13))
    assert ext.bounded
    assert ext.d_min == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-9)
    assert ext.d_max == pytest.approx(math.sqrt(3) / (2 * math.sqrt(2)), rel=1e-9)
    assert sum(e.bounded for e in point_extents(grid3_c)) == 1


def test_extents_scale_with_points(qam16_c):
    scaled = Constellation(name="qam16x2", points=2 * qam16_c.points)
    a = extents(voronoi_region(qam16_c, 5))
    b = extents(voronoi_region(scaled, 5))
    assert b.d_min == pytest.approx(2 * a.d_min, rel=1e-9)
    assert b.d_max == pytest.approx(2 * a.d_max, rel=1e-9)


def test_pep_region_matches_detector(qam16_c, rng):
    i, j = 6, 5
    region = pep_region(qam16_c, i, j)
    assert region.frame == i and region.owner == j
    noise = rng.normal(scale=0.5, size=(2000, 2))
    inside = contains(region, noise)
    detected = np.array([ml_detect(qam16_c, qam16_c.points[i] + x) for x in noise])
    np.testing.assert_array_equal(inside, detected == j)
    assert inside.any()


def test_pep_region_needs_distinct_points(qam16_c):
    with pytest.raises(PreconditionError):
        pep_region(qam16_c, 3, 3)
    with pytest.raises(PreconditionError):
        pair_distance(qam16_c, 3, 3)
    with pytest.raises(PreconditionError):
        voronoi_region(qam16_c, 16)


def test_extents_need_owner_frame(qam16_c):
    with pytest.raises(PreconditionError):
        extents(pep_region(qam16_c, 6, 5))


def test_contains_ball(bpsk_c):
    region = voronoi_region(bpsk_c, 0)
    assert contains_ball(region, 1.0)
    assert not contains_ball(region, 1.0001)
    with pytest.raises(PreconditionError):
        contains_ball(region, -0.1)


def test_vertex_enumeration_guard(qam16_c, monkeypatch):
    monkeypatch.setattr(geometry, "MAX_SUBSETS", 10)
    with pytest.raises(TooLargeError):
        vertices(voronoi_region(qam16_c, 5))


@pytest.mark.parametrize("index", [5, 0])
def test_sample_region_stays_inside(qam16_c, index):
    region = voronoi_region(qam16_c, index)
    pts = sample_region(region, 500, seed=3)
    assert pts.shape == (500, 2)
    assert contains(region, pts).all()


def test_region_to_dict(qam16_c):
    d = region_to_dict(voronoi_region(qam16_c, 5))
    assert d["owner"] == d["frame"] == 5
    assert len(d["rows"]) == len(d["offsets"]) == 15


def _ball(rng, n, radius, count):
    direction = rng.normal(size=(count, n))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return radius * rng.uniform(size=(count, 1)) ** (1.0 / n) * direction


@pytest.mark.parametrize("builtin", ["bpsk", "qpsk", "qam16", "psk8", "grid3x3x3"])
def test_inscribed_ball_lies_in_region(builtin, rng):
    c = parse_builtin(builtin)
    for i in range(c.size):
        region = voronoi_region(c, i)
        d_min = extents(region).d_min
        pts = _ball(rng, c.dim, d_min * (1 - 1e-9), 10_000)
        assert contains(region, pts).all()
        assert contains_ball(region, d_min)


@pytest.mark.parametrize("builtin, pairs", [("qam16", [(6, 5), (0, 1), (5, 0)]), ("grid3x3x3", [(12, 13), (13, 0)])])
def test_pep_region_stays_outside_inscribed_ball(builtin, pairs):
    c = parse_builtin(builtin)
    for i, j in pairs:
        d_min = extents(voronoi_region(c, i)).d_min
        pts = sample_region(pep_region(c, i, j), 2000, seed=i + j)
        assert np.all(np.linalg.norm(pts, axis=1) >= d_min * (1 - 1e-9))


@pytest.mark.parametrize("builtin, index", [("qam16", 5), ("grid3x3x3", 13)])
def test_vertex_d_max_matches_sampled_supremum(builtin, index, rng):
    c = parse_builtin(builtin)
    region = voronoi_region(c, index)
    d_max = extents(region).d_max
    verts = vertices(region)
    best = 0.0
    for _ in range(5):
        pts = rng.uniform(verts.min(axis=0), verts.max(axis=0), size=(200_000, c.dim))
        inside = pts[contains(region, pts)]
        best = max(best, float(np.linalg.norm(inside, axis=1).max()))
    assert best <= d_max * (1 + 1e-9)
    assert best >= 0.98 * d_max


def test_extents_are_rotation_invariant(qam16_c, grid3_c, rng):
    theta = 0.4
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    for c, r in ((qam16_c, rot), (grid3_c, q)):
        turned = Constellation(name=c.name + "-rot", points=c.points @ r.T)
        for i in range(c.size):
            a, b = extents(voronoi_region(c, i)), extents(voronoi_region(turned, i))
            assert b.d_min == pytest.approx(a.d_min, rel=1e-9)
            assert b.bounded == a.bounded
            if a.bounded:
                assert b.d_max == pytest.approx(a.d_max, rel=1e-9)
