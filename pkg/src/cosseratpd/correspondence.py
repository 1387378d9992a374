"""Force and moment states: stabilized correspondence channel and the
bond-based visco-elastic channel, plus the common pair-antisymmetric
assembly of point forces and spin torques.
"""

from __future__ import annotations

import warnings

import numpy as np

from .constitutive import BondConstants, ElasticModuli


def micromodulus(moduli: ElasticModuli, delta: float) -> float:
    """Plane-strain micromodulus D = E(1-4nu) / (4 pi delta^2 (1-nu-2nu^2)).

    Signed; vanishes at nu = 1/4 and goes negative above it.  The
    stabilization profile uses |D| (a warning is emitted once for the
    non-positive branch since the classical bond interpretation breaks
    down there).
    """
    E, nu = moduli.E, moduli.nu
    D = E * (1.0 - 4.0 * nu) / (4.0 * np.pi * delta ** 2 * (1.0 - nu - 2.0 * nu ** 2))
    if D <= 0.0:
        warnings.warn(
            f"micromodulus is non-positive at nu={nu:g}; stabilization uses |D|",
            RuntimeWarning, stacklevel=2)
    return D


def stabilization_profile(nt, moduli: ElasticModuli, delta: float):
    """Per-bond stabilization kernels (C1, C2) = (12|D|/|xi|^3, |D|/|xi|)."""
    aD = abs(micromodulus(moduli, delta))
    return 12.0 * aD / nt.r ** 3, aD / nt.r


def influence_sum(nt, omega_bond):
    """omega0_i = sum_j omega_ij, the (dimensionless) intact influence count."""
    return np.bincount(nt.i, weights=omega_bond, minlength=nt.n_points)


def correspondence_states(nt, omega_bond, omega0, sigma, m, Kxi, R1, R2,
                          C1, C2, G1, G2):
    """Stabilized correspondence force/moment states per directed bond.

    T = omega sigma_i (Kinv xi) + alpha R1,   alpha = G1 C1 omega/omega0_i
    M = omega m_i . (Kinv xi)  + beta  R2,    beta  = G2 C2 omega/omega0_i

    ``Kxi`` is the precomputed Kinv_i xi per bond.
    """
    w0 = omega0[nt.i]
    wn = np.where(w0 > 0.0, omega_bond / np.where(w0 > 0.0, w0, 1.0), 0.0)
    T = np.einsum("nab,nb->na", sigma[nt.i], Kxi)
    T *= omega_bond[:, None]
    T += (G1 * C1 * wn)[:, None] * R1
    M = np.einsum("na,na->n", m[nt.i], Kxi)
    M *= omega_bond
    M += (G2 * C2 * wn) * R2
    return T, M


def bond_channel_states(nt, omega_bond, t1, t2, tm):
    """Expand canonical per-pair bond densities to directed force/moment states.

    The axial/transverse stretches are direction-symmetric while the unit
    vectors flip, so T built from the per-pair densities is exactly
    antisymmetric; the rotational density flips sign with direction.
    """
    p = nt.pair
    T = (omega_bond * t1[p])[:, None] * nt.unit + (omega_bond * t2[p])[:, None] * nt.perp
    M = omega_bond * tm[p] * nt.sign
    return T, M


def pair_differences(nt, T, M):
    """Reduce directed states to per-canonical-pair differences
    (T_ij - T_ji, M_ij - M_ji) evaluated in the i < j orientation."""
    c = nt.canonical
    rc = nt.rev[c]
    return T[c] - T[rc], M[c] - M[rc]


def assemble_pairs(nt, dT, dM, u, volumes):
    """Point force F_i [N] and spin torque tau_i [N m] from per-pair
    antisymmetric differences dT = T_ij - T_ji, dM = M_ij - M_ji (canonical
    i < j orientation):

    F_i   = Vi sum_j (T_ij - T_ji) Vj
    tau_i = Vi sum_j [ (M_ij - M_ji) + 1/2 Y_ij x (T_ij - T_ji) ] Vj

    with Y the deformed bond xi + u' - u and x the planar cross product
    (z component).  Swapping i and j flips Y, dT and dM, so the pair's two
    contributions use the same cross term with opposite dM; summing over
    pairs makes force annihilation exact and the moment arm cancels the
    pair torque, conserving total angular momentum.
    """
    c = nt.canonical
    i, j = nt.i[c], nt.j[c]
    Y = nt.xi[c] + u[j] - u[i]
    cross = 0.5 * (Y[:, 0] * dT[:, 1] - Y[:, 1] * dT[:, 0])
    Vi, Vj = volumes[i], volumes[j]
    n = nt.n_points
    Fx = np.bincount(i, weights=dT[:, 0] * Vj, minlength=n) \
        - np.bincount(j, weights=dT[:, 0] * Vi, minlength=n)
    Fy = np.bincount(i, weights=dT[:, 1] * Vj, minlength=n) \
        - np.bincount(j, weights=dT[:, 1] * Vi, minlength=n)
    tau = np.bincount(i, weights=(dM + cross) * Vj, minlength=n) \
        + np.bincount(j, weights=(cross - dM) * Vi, minlength=n)
    F = np.stack([Fx, Fy], axis=1)
    F *= volumes[:, None]
    tau *= volumes
    return F, tau


def assemble(nt, T, M, u, volumes):
    """Assemble point forces and torques from directed force/moment states
    by reducing them to canonical pair differences first (see
    ``assemble_pairs`` for the definitions)."""
    dT, dM = pair_differences(nt, T, M)
    return assemble_pairs(nt, dT, dM, u, volumes)
