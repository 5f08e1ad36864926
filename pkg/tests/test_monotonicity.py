"""Weighted density ratios, ball masses, and the deficit integral."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbms._kernels import clip_py, deficit_sum_tris, mass_in_ball_tris
from fbms.constraints import Plane, Sphere
from fbms.monotonicity import (
    Polyline,
    check_interior_ball_clearance,
    check_monotonicity,
    default_radius_grid,
    deficit_integral,
    density_profile,
    interior_density,
    mass_in_ball,
)
from fbms.samplers import critical_catenoid, disk, halfplane_patch


def test_polyline_segment_mass_exact():
    line = Polyline(np.array([[-2.0, 0.0], [3.0, 0.0]]))
    out = mass_in_ball(line, np.array([0.0, 0.0]), 1.0)
    assert np.isclose(out.mass, 2.0)
    assert out.clipped_triangle_count == 1  # one segment crosses the sphere
    out = mass_in_ball(line, np.array([10.0, 0.0]), 1.0)
    assert out.mass == 0.0


def test_disk_mass_quadratic_in_radius():
    m = disk(1.0, 24, 72)
    p = np.zeros(3)
    for r in (0.2, 0.4):
        got = mass_in_ball(m, p, r).mass
        assert abs(got - np.pi * r * r) < 2e-3 * np.pi * r * r


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.05, 0.45), min_size=2, max_size=6, unique=True))
def test_mass_monotone_in_radius(radii):
    m = disk(1.0, 10, 30)
    p = np.array([0.3, 0.1, 0.0])
    radii = sorted(radii)
    masses = [mass_in_ball(m, p, r).mass for r in radii]
    assert all(b >= a - 1e-12 for a, b in zip(masses, masses[1:]))


def test_deficit_vanishes_on_cone_through_base():
    # the flat disk is a cone over its own center, so grad r is tangent
    m = disk(1.0, 16, 48)
    d = deficit_integral(m, np.zeros(3), 0.1, 0.4, 12.0, 2.0)
    assert abs(d) < 1e-12


def test_deficit_positive_off_cone():
    m = disk(1.0, 16, 48)
    p = np.array([0.0, 0.0, 0.3])  # off the disk plane: not a cone point
    d = deficit_integral(m, p, 0.35, 0.6, 12.0, 2.0)
    assert d > 1e-3


def test_deficit_rejects_bad_annulus():
    m = disk(1.0, 4, 12)
    with pytest.raises(ValueError):
        deficit_integral(m, np.zeros(3), 0.4, 0.2, 12.0, 2.0)


def test_interior_density_of_disk_is_pi():
    m = disk(1.0, 24, 72)
    prof = interior_density(m, np.zeros(3), [0.1, 0.2, 0.4])
    assert np.allclose(prof.theta, np.pi, rtol=5e-3)
    assert prof.constants["gamma"] == 0.0


def test_interior_density_nondecreasing_at_catenoid_waist():
    m = critical_catenoid(48, 48)
    waist = m.vertices[int(np.argmin(np.abs(m.vertices[:, 2])))]
    prof = interior_density(m, waist, [0.05, 0.1, 0.2])
    # faceting error allowance on top of the analytic monotonicity
    assert all(b >= a * (1 - 5e-3) for a, b in zip(prof.theta, prof.theta[1:]))
    assert prof.theta[0] > np.pi * 0.98  # minimal surface density >= pi


def test_interior_ball_clearance():
    N = Sphere((0, 0, 0), 1.0)
    check_interior_ball_clearance(N, np.array([0.2, 0.0, 0.0]), 0.5)
    with pytest.raises(ValueError, match="touches"):
        check_interior_ball_clearance(N, np.array([0.7, 0, 0]), 0.5)


def test_density_profile_rejects_large_radius():
    m = disk(1.0, 8, 24)
    N = Sphere((0, 0, 0), 1.0)
    with pytest.raises(ValueError, match="R0/2"):
        density_profile(m, N, np.array([1.0, 0.0, 0.0]), [0.1, 0.6])


def test_density_profile_rejects_base_off_constraint():
    m = disk(1.0, 8, 24)
    N = Sphere((0, 0, 0), 1.0)
    with pytest.raises(ValueError, match="not on the constraint"):
        density_profile(m, N, np.array([0.5, 0.0, 0.0]), [0.1, 0.2])


def test_halfplane_profile_constant_and_monotone():
    m = halfplane_patch(48)
    N = Plane((0, 0, 0), (1, 0, 0))
    prof = density_profile(m, N, np.zeros(3), default_radius_grid(0.5, levels=4))
    # half disk mass pi r^2 / 2; gamma = 0 on a plane, so Theta = pi/2
    assert np.allclose(prof.theta, np.pi / 2, rtol=1e-2)
    report = check_monotonicity(prof)
    assert report.passed
    assert report.minimal_verified
    assert report.notes == []


def test_sphere_profile_monotone_with_weight():
    m = disk(1.0, 16, 48)
    N = Sphere((0, 0, 0), 1.0)
    prof = density_profile(m, N, np.array([1.0, 0.0, 0.0]),
                           default_radius_grid(0.4, levels=4))
    assert prof.constants["gamma"] == 2.0
    assert prof.constants["Lambda1"] == 12.0
    report = check_monotonicity(prof)
    assert report.passed


def test_radial_segment_density_exact_exponential():
    # radial segment from the base point: mass(B(0, r)) = r for r <= 1,
    # k = 1, so Theta(r) = exp(6 r) exactly
    line = Polyline(np.array([[0.0, 0.0], [1.0, 0.0]]))
    N = Plane((0, 0, 0), (1, 0, 0))
    radii = [0.1, 0.2, 0.4]
    prof = density_profile(line, N, np.array([0.0, 0.0, 0.0]), radii,
                           kappa=1.0)
    assert prof.constants["Lambda1"] == 6.0
    for r, t in zip(radii, prof.theta):
        assert abs(t - np.exp(6.0 * r)) < 1e-9
    assert check_monotonicity(prof).passed


def test_non_minimal_input_is_flagged():
    m = disk(1.0, 8, 24)
    v = m.vertices.copy()
    r2 = v[:, 0] ** 2 + v[:, 1] ** 2
    v[:, 2] = 0.25 * (1.0 - r2)
    rim = m.is_boundary_vertex()
    v[rim, 2] = 0.0
    bent = m.with_vertices(v)
    N = Sphere((0, 0, 0), 1.0)
    prof = density_profile(bent, N, np.array([1.0, 0.0, 0.0]), [0.1, 0.2])
    assert not prof.minimal_verified
    report = check_monotonicity(prof)
    assert "input not verified minimal" in report.notes


def test_profile_serialization_roundtrip():
    m = disk(1.0, 8, 24)
    prof = interior_density(m, np.zeros(3), [0.1, 0.2])
    payload = json.loads(prof.to_json())
    assert payload["radii"] == [0.1, 0.2]
    csv_text = prof.to_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "r,mass,theta,deficit_to_next"
    assert len(lines) == 3


def test_radius_grid_dyadic():
    grid = default_radius_grid(0.8, levels=4)
    assert grid == [0.1, 0.2, 0.4, 0.8]


def test_backends_agree_on_mass_and_deficit():
    m = critical_catenoid(24, 24)
    v, f = m.vertices, m.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    p = v[int(np.argmax(v[:, 2]))]
    for r in (0.15, 0.3):
        m1, c1 = mass_in_ball_tris(a, b, c, p, r)
        m2, c2 = clip_py.mass_in_ball_tris(a, b, c, p, r)
        assert abs(m1 - m2) < 1e-10 * (1 + abs(m2))
        assert c1 == c2
    d1 = deficit_sum_tris(a, b, c, n, p, 0.1, 0.3, 12.0, 2.0)
    d2 = clip_py.deficit_sum_tris(a, b, c, n, p, 0.1, 0.3, 12.0, 2.0)
    assert abs(d1 - d2) < 1e-8 * (1 + abs(d2))
