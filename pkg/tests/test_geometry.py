import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from kernelritz.geometry import (
    CircularSector,
    UnitSquare,
    bbox_grid,
    gauss_boundary,
    is_interior,
    mesh_norm,
    place_centers,
    polar_angle,
    sample_boundary,
    sample_interior,
)

SECTOR = CircularSector()
DOMAINS = [UnitSquare(), SECTOR, CircularSector(angle=0.7 * math.pi, radius=1.0)]


def test_areas_and_perimeters():
    assert UnitSquare().area == 1.0 and UnitSquare().perimeter == 4.0
    assert SECTOR.area == pytest.approx(0.5 * 1.5**2 * 1.5 * math.pi)
    assert SECTOR.perimeter == pytest.approx(3.0 + 1.5 * 1.5 * math.pi)


def test_interior_examples():
    assert is_interior(UnitSquare(), (0.5, 0.5)) is True
    assert is_interior(SECTOR, (0.0, -1.0)) is False
    assert is_interior(SECTOR, (-0.5, 0.5)) is True
    assert is_interior(SECTOR, (-0.5, -0.5)) is True
    assert is_interior(SECTOR, (0.5, -0.5)) is False
    assert is_interior(SECTOR, (1.0, 0.0)) is False
    assert is_interior(SECTOR, (0.0, 0.0)) is False
    assert is_interior(SECTOR, (1.5, 0.1)) is False


def test_polar_angle_range():
    theta = polar_angle([[1, 0], [0, 1], [-1, 0], [0, -1], [1, -1e-300]])
    np.testing.assert_allclose(theta[:4], [0, math.pi / 2, math.pi, 1.5 * math.pi])
    assert np.all((theta >= 0) & (theta < 2 * math.pi))


def test_invalid_sector():
    with pytest.raises(ValueError):
        CircularSector(angle=2 * math.pi)
    with pytest.raises(ValueError):
        CircularSector(radius=0.0)


def test_place_centers_square_n1():
    c = place_centers(UnitSquare(), 1)
    assert len(c) == 9
    expected = {(0.5, 0.5), (0, 0), (0.5, 0), (1, 0), (1, 0.5), (1, 1), (0.5, 1), (0, 1), (0, 0.5)}
    assert {(round(x, 12) + 0.0, round(y, 12) + 0.0) for x, y in c} == expected


def test_place_centers_square_n4():
    c = place_centers(UnitSquare(), 4)
    assert len(c) == 36
    assert UnitSquare().contains(c).sum() == 16


def test_place_centers_sector_matches_rejection_oracle():
    for n in (2, 3, 5, 8):
        grid = [(-1.5 + 3 * i / (n + 1), -1.5 + 3 * j / (n + 1)) for i in range(1, n + 1) for j in range(1, n + 1)]
        inside = 0
        for x, y in grid:
            r = math.hypot(x, y)
            t = math.atan2(y, x) % (2 * math.pi)
            inside += 0 < r < 1.5 and 0 < t < 1.5 * math.pi
        c = place_centers(SECTOR, n)
        assert len(c) == inside + 4 * n + 4
        np.testing.assert_allclose(c[inside], [0.0, 0.0])


@pytest.mark.parametrize("domain", DOMAINS)
@pytest.mark.parametrize("n", [1, 2, 5, 12])
def test_place_centers_distinct_and_on_closure(domain, n):
    c = place_centers(domain, n)
    assert pdist(c).min() > 1e-9
    assert np.all(domain.contains(c, closed=True))
    b = c[-(4 * n + 4):]
    assert np.all(domain.boundary_distance(b) < 1e-12)


def test_place_centers_rejects_zero():
    with pytest.raises(ValueError):
        place_centers(UnitSquare(), 0)


@pytest.mark.parametrize("domain", DOMAINS)
def test_sample_interior(domain):
    pts, w = sample_interior(domain, 1000, np.random.default_rng(0))
    assert pts.shape == (1000, 2)
    assert np.all(is_interior(domain, pts))
    assert w.sum() == pytest.approx(domain.area, abs=1e-12)


def test_sample_interior_deterministic():
    a, _ = sample_interior(SECTOR, 500, np.random.default_rng(5))
    b, _ = sample_interior(SECTOR, 500, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_sector_area_monte_carlo_oracle():
    rng = np.random.default_rng(2024)
    box = rng.uniform(-1.5, 1.5, (100_000, 2))
    frac = is_interior(SECTOR, box).mean()
    assert frac == pytest.approx(1.6875 * math.pi / 9, rel=0.01)
    assert frac == pytest.approx(SECTOR.area / 9, rel=0.01)


def test_square_bottom_edge_normal():
    b = sample_boundary(UnitSquare(), 2000, np.random.default_rng(1))
    bottom = np.abs(b.points[:, 1]) < 1e-15
    assert bottom.any()
    np.testing.assert_array_equal(b.normals[bottom], np.tile([0.0, -1.0], (bottom.sum(), 1)))


def test_sector_arc_normal_radial():
    b = sample_boundary(SECTOR, 2000, np.random.default_rng(2))
    arc = np.abs(np.hypot(b.points[:, 0], b.points[:, 1]) - 1.5) < 1e-12
    phi = np.arctan2(b.points[arc, 1], b.points[arc, 0])
    np.testing.assert_allclose(b.normals[arc], np.column_stack([np.cos(phi), np.sin(phi)]), atol=1e-14)


def test_sector_last_edge_normal_points_outward():
    pts, nrm = SECTOR.boundary_chart(np.array([SECTOR.perimeter - 0.7]))
    np.testing.assert_allclose(pts[0], [0.0, -0.7], atol=1e-15)
    np.testing.assert_allclose(nrm[0], [1.0, 0.0], atol=1e-15)
    assert not is_interior(SECTOR, pts[0] + 1e-6 * nrm[0])
    assert is_interior(SECTOR, pts[0] - 1e-6 * nrm[0])


@pytest.mark.parametrize("domain", DOMAINS)
@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_boundary_sample_invariants(domain, seed):
    b = sample_boundary(domain, 300, np.random.default_rng(seed))
    np.testing.assert_allclose(np.linalg.norm(b.normals, axis=1), 1.0, atol=1e-12)
    assert b.weights.sum() == pytest.approx(domain.perimeter, abs=1e-9)
    assert np.all(domain.boundary_distance(b.points) < 1e-9)
    # outwardness away from corners
    s_corner = domain.boundary_chart(domain.corners())[0]
    far = np.min(np.linalg.norm(b.points[:, None, :] - s_corner[None], axis=2), axis=1) > 1e-4
    p, n = b.points[far], b.normals[far]
    assert not np.any(domain.contains(p + 1e-6 * n))
    assert np.all(domain.contains(p - 1e-6 * n))


@pytest.mark.parametrize("domain", DOMAINS)
def test_boundary_samples_avoid_corners(domain):
    b = sample_boundary(domain, 5000, np.random.default_rng(3))
    corners = domain.boundary_chart(domain.corners())[0]
    d = np.linalg.norm(b.points[:, None, :] - corners[None], axis=2)
    assert d.min() >= 1e-12


@pytest.mark.parametrize("domain", DOMAINS)
def test_gauss_rules_integrate_exactly(domain):
    pts, w = domain.gauss_interior(8, 4)
    assert w.sum() == pytest.approx(domain.area, rel=1e-13)
    assert np.all(domain.contains(pts))
    b = gauss_boundary(domain, 8, 4)
    assert b.weights.sum() == pytest.approx(domain.perimeter, rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(b.normals, axis=1), 1.0)


def test_gauss_interior_polynomial_moment():
    pts, w = UnitSquare().gauss_interior(3, 4)
    assert np.dot(w, pts[:, 0] ** 3 * pts[:, 1] ** 5) == pytest.approx(1 / 24, rel=1e-13)
    # second moment of the sector: int r^2 dA = angle R^4 / 4
    pts, w = SECTOR.gauss_interior(4, 4)
    assert np.dot(w, (pts**2).sum(axis=1)) == pytest.approx(1.5 * math.pi * 1.5**4 / 4, rel=1e-12)


def test_gauss_boundary_line_integral():
    # integral of x over the unit-square boundary: 1/2 + 1 + 1/2 + 0
    b = gauss_boundary(UnitSquare(), 4, 3)
    assert np.dot(b.weights, b.points[:, 0]) == pytest.approx(2.0, rel=1e-13)


def test_mesh_norm_single_center():
    assert mesh_norm(UnitSquare(), [[0.5, 0.5]], 400) == pytest.approx(math.sqrt(2) / 2, abs=0.01)


def test_mesh_norm_empty():
    with pytest.raises(ValueError):
        mesh_norm(UnitSquare(), np.zeros((0, 2)))


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_mesh_norm_monotone_in_centers(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 1, (6, 2))
    h0 = mesh_norm(UnitSquare(), c, 60)
    h1 = mesh_norm(UnitSquare(), np.vstack([c, rng.uniform(0, 1, (1, 2))]), 60)
    assert h1 <= h0


def test_mesh_norm_scaling():
    hs = {n: mesh_norm(UnitSquare(), place_centers(UnitSquare(), n)) for n in (2, 5, 11)}
    for n, h in hs.items():
        # half-diagonal of a grid cell up to probe-grid resolution
        assert h == pytest.approx(math.sqrt(2) / (2 * (n + 1)), abs=0.01)
    assert hs[2] > hs[5] > hs[11]


def test_bbox_grid_counts():
    assert len(bbox_grid(UnitSquare(), 101)) == 10201
    g = bbox_grid(SECTOR, 101)
    assert np.all(SECTOR.contains(g, closed=True))
    assert len(g) / 10201 == pytest.approx(SECTOR.area / 9, rel=0.03)
