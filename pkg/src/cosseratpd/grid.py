"""Uniform point lattices, bond tables and nonlocal shape tensors.

Material points sit at cell centers of a regular nx-by-ny lattice with
spacing dx and out-of-plane thickness t (2D plane strain, every point
carries volume dx*dx*t).  Bonds connect every pair of points closer than
the horizon delta.  The bond table is stored flat (struct-of-arrays) with
every unordered pair appearing twice, once per direction, in a fixed
deterministic order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateNeighborhoodError


@dataclass
class PointField:
    """Per-point reference data for a uniform lattice.

    Attributes
    ----------
    position : (N, 2) float array, cell-center coordinates [m]
    volume : (N,) float array, point volumes [m^3]
    density : (N,) partial (bulk) mass density rho^s [kg/m^3]
    phi : (N,) solid volume fraction
    micro_inertia : (N,) micro-inertia density J^s [kg/m]
    """

    position: np.ndarray
    volume: np.ndarray
    density: np.ndarray
    phi: np.ndarray
    micro_inertia: np.ndarray
    nx: int
    ny: int
    dx: float
    thickness: float

    @property
    def n_points(self) -> int:
        return self.position.shape[0]

    def mass(self) -> np.ndarray:
        """Translational point masses rho^s * V [kg]."""
        return self.density * self.volume

    def rotational_inertia(self) -> np.ndarray:
        """Rotational point inertias J^s * V [kg m^2]."""
        return self.micro_inertia * self.volume


def build_grid(nx, ny, dx, thickness, density, density_kind="partial",
               phi0=1.0, micro_inertia=None, length_scale=None) -> PointField:
    """Build a uniform nx-by-ny point lattice.

    Parameters
    ----------
    density : float
        Interpreted according to ``density_kind``: "partial" means the
        bulk density rho^s is given directly; "intrinsic" means the solid
        grain density rho_s is given and rho^s = phi0 * rho_s.
    micro_inertia : float, optional
        Micro-inertia density J^s [kg/m].  Defaults to rho^s * l^2 with
        l = ``length_scale`` (required in that case).
    """
    if nx < 1 or ny < 1:
        raise ConfigError(f"geometry.nx/ny must be >= 1, got {nx}x{ny}")
    if dx <= 0.0 or thickness <= 0.0:
        raise ConfigError("geometry.dx and geometry.thickness must be positive")
    if not 0.0 < phi0 <= 1.0:
        raise ConfigError(f"material.phi0 must lie in (0, 1], got {phi0}")
    if density <= 0.0:
        raise ConfigError("material.rho must be positive")

    if density_kind == "partial":
        rho_partial = float(density)
    elif density_kind == "intrinsic":
        rho_partial = float(phi0) * float(density)
    else:
        raise ConfigError(f"material.density_kind must be 'partial' or 'intrinsic', got {density_kind!r}")

    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    pos = np.empty((nx * ny, 2))
    pos[:, 0] = (ix.ravel() + 0.5) * dx
    pos[:, 1] = (iy.ravel() + 0.5) * dx

    n = nx * ny
    vol = np.full(n, dx * dx * thickness)
    if micro_inertia is None:
        if length_scale is None:
            raise ConfigError("micro_inertia requires material.l when not given explicitly")
        micro_inertia = rho_partial * float(length_scale) ** 2
    return PointField(
        position=pos,
        volume=vol,
        density=np.full(n, rho_partial),
        phi=np.full(n, float(phi0)),
        micro_inertia=np.full(n, float(micro_inertia)),
        nx=int(nx), ny=int(ny), dx=float(dx), thickness=float(thickness),
    )


@dataclass
class NeighborTable:
    """Flat directed bond table.

    Every unordered pair within the horizon appears twice: once as (i, j)
    and once as (j, i).  Bonds are sorted by (i, j), which fixes the
    reduction order used everywhere downstream.

    Attributes
    ----------
    i, j : (B,) int32, bond endpoints (bond points from i to j)
    xi : (B, 2) reference bond vectors X_j - X_i
    r : (B,) bond lengths |xi|
    unit : (B, 2) xi / r
    perp : (B, 2) e_z x unit  (in-plane perpendicular)
    rev : (B,) index of the reversed bond (j, i)
    pair : (B,) canonical pair index in [0, P)
    sign : (B,) +1 where i < j, -1 otherwise
    canonical : (P,) directed-bond index of each pair's i < j orientation
    """

    i: np.ndarray
    j: np.ndarray
    xi: np.ndarray
    r: np.ndarray
    unit: np.ndarray
    perp: np.ndarray
    rev: np.ndarray
    pair: np.ndarray
    sign: np.ndarray
    canonical: np.ndarray
    n_points: int
    delta: float

    @property
    def n_bonds(self) -> int:
        return self.i.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.canonical.shape[0]

    def xi_perp(self) -> np.ndarray:
        """Full-length perpendicular e_z x xi, used by Omega_bar x xi terms."""
        out = np.empty_like(self.xi)
        out[:, 0] = -self.xi[:, 1]
        out[:, 1] = self.xi[:, 0]
        return out


def find_neighbors(points: PointField, delta: float) -> NeighborTable:
    """Enumerate all bonds with |X_j - X_i| <= delta on a uniform lattice.

    The horizon test runs on integer lattice offsets, so points exactly on
    the horizon are included without floating-point ambiguity.
    """
    if delta <= 0.0:
        raise ConfigError("horizon delta must be positive")
    nx, ny, dx = points.nx, points.ny, points.dx
    n = points.n_points
    m = int(np.floor(delta / dx + 1e-9))
    ratio2 = (delta / dx) ** 2 * (1.0 + 1e-12)

    i_blocks, j_blocks, ox_blocks, oy_blocks = [], [], [], []
    for oy in range(-m, m + 1):
        for ox in range(-m, m + 1):
            if ox == 0 and oy == 0:
                continue
            if ox * ox + oy * oy > ratio2:
                continue
            x0, x1 = max(0, -ox), nx - max(0, ox)
            y0, y1 = max(0, -oy), ny - max(0, oy)
            if x0 >= x1 or y0 >= y1:
                continue
            ixs = np.arange(x0, x1)
            iys = np.arange(y0, y1)
            src = (iys[:, None] * nx + ixs[None, :]).ravel()
            dst = src + oy * nx + ox
            i_blocks.append(src)
            j_blocks.append(dst)
            ox_blocks.append(np.full(src.size, ox * dx))
            oy_blocks.append(np.full(src.size, oy * dx))

    if not i_blocks:
        raise ConfigError(f"horizon delta={delta} smaller than grid spacing dx={dx}: no bonds")

    i_arr = np.concatenate(i_blocks)
    j_arr = np.concatenate(j_blocks)
    xi = np.stack([np.concatenate(ox_blocks), np.concatenate(oy_blocks)], axis=1)

    # canonical deterministic order: sort by (i, j)
    keys = i_arr.astype(np.int64) * n + j_arr
    order = np.argsort(keys, kind="stable")
    i_arr, j_arr, xi, keys = i_arr[order], j_arr[order], xi[order], keys[order]

    rev = np.searchsorted(keys, j_arr.astype(np.int64) * n + i_arr)
    canon_mask = i_arr < j_arr
    canonical = np.nonzero(canon_mask)[0].astype(np.int64)
    pair = np.empty(i_arr.shape[0], dtype=np.int64)
    pair[canonical] = np.arange(canonical.size)
    pair[rev[canonical]] = np.arange(canonical.size)

    r = np.hypot(xi[:, 0], xi[:, 1])
    unit = xi / r[:, None]
    perp = np.empty_like(unit)
    perp[:, 0] = -unit[:, 1]
    perp[:, 1] = unit[:, 0]
    sign = np.where(canon_mask, 1.0, -1.0)

    return NeighborTable(
        i=i_arr.astype(np.int32), j=j_arr.astype(np.int32), xi=xi, r=r,
        unit=unit, perp=perp, rev=rev, pair=pair, sign=sign,
        canonical=canonical, n_points=n, delta=float(delta),
    )


def segment_crossing_pairs(nt: NeighborTable, points: PointField, segment) -> np.ndarray:
    """Canonical pair mask of bonds whose chord crosses a line segment.

    Used to pre-break bonds along an initial notch.  A bond crosses when
    the two endpoints straddle the (extended) segment line strictly and
    the intersection parameter falls inside the segment.
    """
    x0, y0, x1, y1 = (float(c) for c in segment)
    a = points.position[nt.i[nt.canonical]]
    b = points.position[nt.j[nt.canonical]]
    d = np.array([x1 - x0, y1 - y0])
    # signed side of each endpoint w.r.t. the segment line
    sa = (a[:, 0] - x0) * d[1] - (a[:, 1] - y0) * d[0]
    sb = (b[:, 0] - x0) * d[1] - (b[:, 1] - y0) * d[0]
    straddle = (sa * sb) < 0.0
    # intersection p = a + s*(b - a) with s = sa / (sa - sb); keep it on the segment
    denom = np.where(straddle, sa - sb, 1.0)
    s = np.where(straddle, sa / denom, 0.0)
    px = a[:, 0] + s * (b[:, 0] - a[:, 0])
    py = a[:, 1] + s * (b[:, 1] - a[:, 1])
    seg_len2 = d[0] * d[0] + d[1] * d[1]
    u = ((px - x0) * d[0] + (py - y0) * d[1]) / seg_len2
    return straddle & (u >= 0.0) & (u <= 1.0)


def shape_tensor(nt: NeighborTable, volumes: np.ndarray, omega_bond: np.ndarray) -> np.ndarray:
    """Nonlocal shape tensors K_i = sum_j omega_ij xi (x) xi V_j, shape (N, 2, 2)."""
    w = omega_bond * volumes[nt.j]
    n = nt.n_points
    kxx = np.bincount(nt.i, weights=w * nt.xi[:, 0] * nt.xi[:, 0], minlength=n)
    kxy = np.bincount(nt.i, weights=w * nt.xi[:, 0] * nt.xi[:, 1], minlength=n)
    kyy = np.bincount(nt.i, weights=w * nt.xi[:, 1] * nt.xi[:, 1], minlength=n)
    K = np.empty((n, 2, 2))
    K[:, 0, 0] = kxx
    K[:, 0, 1] = kxy
    K[:, 1, 0] = kxy
    K[:, 1, 1] = kyy
    return K


def invert_shape_tensor(K: np.ndarray, strict: bool = True):
    """Invert 2x2 shape tensors analytically.

    Returns (Kinv, ok) where ok marks well-conditioned points.  Degenerate
    rows get Kinv = 0.  With ``strict`` a DegenerateNeighborhoodError is
    raised for degenerate points that do have bonds (trace > 0); isolated
    points (K identically zero) are always tolerated.
    """
    det = K[:, 0, 0] * K[:, 1, 1] - K[:, 0, 1] * K[:, 1, 0]
    tr = K[:, 0, 0] + K[:, 1, 1]
    scale = (0.5 * tr) ** 2
    ok = det > 1e-12 * np.maximum(scale, 1e-300)
    bad = ~ok & (tr > 0.0)
    if strict and np.any(bad):
        raise DegenerateNeighborhoodError(np.nonzero(bad)[0])
    Kinv = np.zeros_like(K)
    safe = np.where(ok, det, 1.0)
    Kinv[ok, 0, 0] = (K[:, 1, 1] / safe)[ok]
    Kinv[ok, 1, 1] = (K[:, 0, 0] / safe)[ok]
    Kinv[ok, 0, 1] = (-K[:, 0, 1] / safe)[ok]
    Kinv[ok, 1, 0] = (-K[:, 1, 0] / safe)[ok]
    return Kinv, ok


def boundary_region_mask(points: PointField, region: str, depth_rows: int) -> np.ndarray:
    """Point mask of a boundary strip ``depth_rows`` deep on the named side."""
    ixes = np.arange(points.n_points) % points.nx
    iyes = np.arange(points.n_points) // points.nx
    if region == "top":
        return iyes >= points.ny - depth_rows
    if region == "bottom":
        return iyes < depth_rows
    if region == "left":
        return ixes < depth_rows
    if region == "right":
        return ixes >= points.nx - depth_rows
    raise ConfigError(f"unknown boundary region {region!r}")
