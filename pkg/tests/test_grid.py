"""Lattice construction, neighbor tables, shape tensors, region masks."""

import numpy as np
import pytest

from conftest import make_field, make_table
from cosseratpd.errors import ConfigError, DegenerateNeighborhoodError
from cosseratpd.grid import (boundary_region_mask, build_grid, find_neighbors,
                             invert_shape_tensor, segment_crossing_pairs,
                             shape_tensor)


def brute_force_pairs(pos, delta):
    """O(N^2) reference neighbor enumeration."""
    out = set()
    n = pos.shape[0]
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            d = np.hypot(pos[b, 0] - pos[a, 0], pos[b, 1] - pos[a, 1])
            if d <= delta * (1.0 + 1e-12):
                out.add((a, b))
    return out


def test_grid_positions_masses():
    pts = make_field(nx=3, ny=2, dx=0.5, thickness=2.0, rho=1650.0)
    assert pts.n_points == 6
    # cell centers, row-major with x fastest
    np.testing.assert_allclose(pts.position[0], [0.25, 0.25])
    np.testing.assert_allclose(pts.position[1], [0.75, 0.25])
    np.testing.assert_allclose(pts.position[3], [0.25, 0.75])
    np.testing.assert_allclose(pts.volume, 0.5 * 0.5 * 2.0)
    np.testing.assert_allclose(pts.mass(), 1650.0 * 0.5)
    # default micro-inertia rho l^2 with l = dx here
    np.testing.assert_allclose(pts.micro_inertia, 1650.0 * 0.25)
    np.testing.assert_allclose(pts.rotational_inertia(), 1650.0 * 0.25 * 0.5)


def test_intrinsic_density_scaling():
    pts = make_field(rho=2750.0, density_kind="intrinsic", phi0=0.89)
    np.testing.assert_allclose(pts.density, 0.89 * 2750.0)
    np.testing.assert_allclose(pts.phi, 0.89)


def test_build_grid_rejects_bad_input():
    with pytest.raises(ConfigError):
        build_grid(0, 3, 1.0, 1.0, 1000.0, length_scale=1.0)
    with pytest.raises(ConfigError):
        build_grid(3, 3, -1.0, 1.0, 1000.0, length_scale=1.0)
    with pytest.raises(ConfigError):
        build_grid(3, 3, 1.0, 1.0, -5.0, length_scale=1.0)
    with pytest.raises(ConfigError):
        build_grid(3, 3, 1.0, 1.0, 1000.0, phi0=1.5, length_scale=1.0)
    with pytest.raises(ConfigError):
        build_grid(3, 3, 1.0, 1.0, 1000.0, density_kind="bogus", length_scale=1.0)
    with pytest.raises(ConfigError):
        # default micro-inertia needs the length scale
        build_grid(3, 3, 1.0, 1.0, 1000.0)


@pytest.mark.parametrize("nx,ny,factor", [(5, 4, 2.05), (7, 3, 1.5),
                                          (6, 6, 4.05), (3, 3, 1.05),
                                          (9, 2, 2.05)])
def test_neighbors_match_bruteforce(nx, ny, factor):
    dx = 0.7
    pts = make_field(nx=nx, ny=ny, dx=dx)
    nt = find_neighbors(pts, factor * dx)
    got = set(zip(nt.i.tolist(), nt.j.tolist()))
    want = brute_force_pairs(pts.position, factor * dx)
    assert got == want
    # bond geometry agrees with positions
    np.testing.assert_allclose(nt.xi, pts.position[nt.j] - pts.position[nt.i],
                               atol=1e-12)
    np.testing.assert_allclose(nt.r, np.hypot(nt.xi[:, 0], nt.xi[:, 1]))


def test_neighbor_table_invariants():
    pts, nt = make_table(nx=6, ny=5, factor=2.05)
    # rev is an involution that swaps endpoints
    assert np.array_equal(nt.rev[nt.rev], np.arange(nt.n_bonds))
    assert np.array_equal(nt.i[nt.rev], nt.j)
    assert np.array_equal(nt.j[nt.rev], nt.i)
    assert np.array_equal(nt.xi[nt.rev], -nt.xi)
    # pair indices shared between the two directions, canonical has i < j
    assert np.array_equal(nt.pair[nt.rev], nt.pair)
    assert np.all(nt.i[nt.canonical] < nt.j[nt.canonical])
    assert np.array_equal(nt.pair[nt.canonical], np.arange(nt.n_pairs))
    assert np.all(nt.sign[nt.canonical] == 1.0)
    assert np.all(nt.sign[nt.rev[nt.canonical]] == -1.0)
    assert 2 * nt.n_pairs == nt.n_bonds
    # deterministic (i, j) sort order
    keys = nt.i.astype(np.int64) * nt.n_points + nt.j
    assert np.all(np.diff(keys) > 0)
    # unit/perp orthonormal frame
    np.testing.assert_allclose(np.hypot(nt.unit[:, 0], nt.unit[:, 1]), 1.0)
    np.testing.assert_allclose(
        nt.unit[:, 0] * nt.perp[:, 0] + nt.unit[:, 1] * nt.perp[:, 1], 0.0,
        atol=1e-15)
    np.testing.assert_allclose(
        nt.unit[:, 0] * nt.perp[:, 1] - nt.unit[:, 1] * nt.perp[:, 0], 1.0)


def test_interior_stencils_and_shape_tensor():
    # delta = 2.05 dx: offsets (+-1,0),(0,+-1),(+-1,+-1),(+-2,0),(0,+-2)
    # -> 12 neighbors, sum xi_x^2 = 14 dx^2
    dx, t = 0.4, 2.0
    pts, nt = make_table(nx=9, ny=9, dx=dx, thickness=t, factor=2.05)
    counts = np.bincount(nt.i, minlength=nt.n_points)
    center = 4 * 9 + 4
    assert counts[center] == 12
    K = shape_tensor(nt, pts.volume, np.ones(nt.n_bonds))
    V = dx * dx * t
    np.testing.assert_allclose(K[center], 14.0 * V * dx * dx * np.eye(2),
                               rtol=1e-13)

    # delta = 4.05 dx: 48 neighbors, sum xi_x^2 = 192 dx^2
    pts4, nt4 = make_table(nx=11, ny=11, dx=dx, thickness=t, factor=4.05)
    counts4 = np.bincount(nt4.i, minlength=nt4.n_points)
    center4 = 5 * 11 + 5
    assert counts4[center4] == 48
    K4 = shape_tensor(nt4, pts4.volume, np.ones(nt4.n_bonds))
    np.testing.assert_allclose(K4[center4], 192.0 * V * dx * dx * np.eye(2),
                               rtol=1e-13)


def test_shape_tensor_respects_influence(rng):
    pts, nt = make_table(nx=5, ny=5)
    w = rng.choice([0.0, 0.35, 1.0], size=nt.n_bonds)
    K = shape_tensor(nt, pts.volume, w)
    # brute-force reference
    ref = np.zeros((pts.n_points, 2, 2))
    for b in range(nt.n_bonds):
        ref[nt.i[b]] += w[b] * np.outer(nt.xi[b], nt.xi[b]) * pts.volume[nt.j[b]]
    np.testing.assert_allclose(K, ref, rtol=1e-13, atol=1e-13)


def test_invert_shape_tensor_matches_numpy(rng):
    A = rng.normal(size=(30, 2, 2))
    K = A @ np.swapaxes(A, 1, 2) + 0.1 * np.eye(2)  # SPD
    Kinv, ok = invert_shape_tensor(K)
    assert ok.all()
    np.testing.assert_allclose(Kinv, np.linalg.inv(K), rtol=1e-10)


def test_invert_shape_tensor_degenerate():
    # single-row lattice: all bonds along x, K_yy = 0 -> degenerate but tr > 0
    pts, nt = make_table(nx=6, ny=1, factor=1.05)
    K = shape_tensor(nt, pts.volume, np.ones(nt.n_bonds))
    with pytest.raises(DegenerateNeighborhoodError) as ex:
        invert_shape_tensor(K, strict=True)
    assert len(ex.value.point_ids) == 6
    Kinv, ok = invert_shape_tensor(K, strict=False)
    assert not ok.any()
    assert np.all(Kinv == 0.0)
    # fully isolated point (K = 0) is tolerated even in strict mode
    K0 = np.zeros((1, 2, 2))
    Kinv0, ok0 = invert_shape_tensor(K0, strict=True)
    assert not ok0[0] and np.all(Kinv0 == 0.0)


def _segments_cross(p, q, a, b):
    """Reference predicate: open segment pq strictly straddles line ab and
    the crossing point lies within the ab extent (orientation form)."""
    def orient(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])
    d1 = orient(a, b, p)
    d2 = orient(a, b, q)
    if d1 * d2 >= 0.0:
        return False
    # crossing parameter along ab
    d3 = orient(p, q, a)
    d4 = orient(p, q, b)
    return d3 * d4 <= 0.0


def test_segment_crossing_matches_bruteforce():
    pts, nt = make_table(nx=6, ny=5, dx=1.0, factor=2.05)
    seg = (3.0, 0.0, 3.0, 2.5)  # vertical notch between columns 2 and 3
    mask = segment_crossing_pairs(nt, pts, seg)
    a = (seg[0], seg[1])
    b = (seg[2], seg[3])
    c = nt.canonical
    for k in range(nt.n_pairs):
        p = tuple(pts.position[nt.i[c[k]]])
        q = tuple(pts.position[nt.j[c[k]]])
        assert mask[k] == _segments_cross(p, q, a, b), (p, q)
    # a notch outside the domain breaks nothing
    assert not segment_crossing_pairs(nt, pts, (100.0, 0.0, 100.0, 5.0)).any()
    # horizontal mid-plane notch severs every vertical bond crossing it
    full = segment_crossing_pairs(nt, pts, (-1.0, 2.0, 100.0, 2.0))
    crossing = (pts.position[nt.i[c], 1] - 2.0) * (pts.position[nt.j[c], 1] - 2.0) < 0
    assert np.array_equal(full, crossing)


def test_boundary_region_mask():
    pts = make_field(nx=5, ny=4)
    top = boundary_region_mask(pts, "top", 1)
    assert top.sum() == 5
    assert np.all(pts.position[top, 1] == pts.position[:, 1].max())
    bottom = boundary_region_mask(pts, "bottom", 2)
    assert bottom.sum() == 10
    left = boundary_region_mask(pts, "left", 1)
    assert left.sum() == 4
    right = boundary_region_mask(pts, "right", 3)
    assert right.sum() == 12
    with pytest.raises(ConfigError):
        boundary_region_mask(pts, "middle", 1)


def test_find_neighbors_rejects_empty_horizon():
    pts = make_field(nx=3, ny=3, dx=1.0)
    with pytest.raises(ConfigError):
        find_neighbors(pts, 0.5)  # smaller than dx: no bonds
    with pytest.raises(ConfigError):
        find_neighbors(pts, -1.0)
