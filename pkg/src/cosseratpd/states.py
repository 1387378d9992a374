"""Bond states and nonlocal kinematic fields.

All small-deformation: cross products with the micro-rotation use the
reference bond vector xi, and in 2D ``Omega_bar x xi`` reduces to
``omega_bar * (-xi_y, xi_x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import NeighborTable


@dataclass
class BondStates:
    """Relative and composite states on every directed bond.

    U = u' - u, Omega = w' - w, wbar = (w' + w)/2 and the composite
    displacement state Ucomp = U - wbar x xi.  Rate members are present
    when velocity fields were supplied.
    """

    U: np.ndarray            # (B, 2)
    Omega: np.ndarray        # (B,)
    wbar: np.ndarray         # (B,)
    Ucomp: np.ndarray        # (B, 2)
    Udot: Optional[np.ndarray] = None
    Omegadot: Optional[np.ndarray] = None
    wbardot: Optional[np.ndarray] = None
    Ucompdot: Optional[np.ndarray] = None


def _composite(U, wbar, nt):
    out = np.empty_like(U)
    out[:, 0] = U[:, 0] + wbar * nt.xi[:, 1]
    out[:, 1] = U[:, 1] - wbar * nt.xi[:, 0]
    return out


def bond_states(nt: NeighborTable, u, w, v=None, wdot=None) -> BondStates:
    """Evaluate relative/composite bond states (and rates when v, wdot given)."""
    i, j = nt.i, nt.j
    U = u[j] - u[i]
    Omega = w[j] - w[i]
    wbar = 0.5 * (w[i] + w[j])
    st = BondStates(U=U, Omega=Omega, wbar=wbar, Ucomp=_composite(U, wbar, nt))
    if v is not None:
        st.Udot = v[j] - v[i]
        st.wbardot = 0.5 * (wdot[i] + wdot[j])
        st.Omegadot = wdot[j] - wdot[i]
        st.Ucompdot = _composite(st.Udot, st.wbardot, nt)
    return st


def nonlocal_strain(nt: NeighborTable, Ucomp, omega_bond, volumes, Kinv) -> np.ndarray:
    """Nonlocal strain eps_i = [sum_j w (Ucomp (x) xi) V_j] K_i^-1, shape (N, 2, 2).

    Not symmetrized: the antisymmetric part carries the relative rotation.
    """
    wv = omega_bond * volumes[nt.j]
    n = nt.n_points
    S = np.empty((n, 2, 2))
    for a in range(2):
        for b in range(2):
            S[:, a, b] = np.bincount(nt.i, weights=wv * Ucomp[:, a] * nt.xi[:, b], minlength=n)
    return S @ Kinv


def nonlocal_wryness(nt: NeighborTable, Omega, omega_bond, volumes, Kinv) -> np.ndarray:
    """Nonlocal wryness kappa_i = [sum_j w (Omega xi) V_j] K_i^-1, shape (N, 2)."""
    wv = omega_bond * volumes[nt.j] * Omega
    n = nt.n_points
    t = np.empty((n, 2))
    t[:, 0] = np.bincount(nt.i, weights=wv * nt.xi[:, 0], minlength=n)
    t[:, 1] = np.bincount(nt.i, weights=wv * nt.xi[:, 1], minlength=n)
    return np.einsum("na,nab->nb", t, Kinv)


def residual_states(nt: NeighborTable, Ucomp, Omega, eps, kappa):
    """Zero-energy residuals R1 = Ucomp - eps.xi (per bond) and R2 = Omega - kappa.xi."""
    e = eps[nt.i]
    R1 = np.empty_like(Ucomp)
    R1[:, 0] = Ucomp[:, 0] - (e[:, 0, 0] * nt.xi[:, 0] + e[:, 0, 1] * nt.xi[:, 1])
    R1[:, 1] = Ucomp[:, 1] - (e[:, 1, 0] * nt.xi[:, 0] + e[:, 1, 1] * nt.xi[:, 1])
    k = kappa[nt.i]
    R2 = Omega - (k[:, 0] * nt.xi[:, 0] + k[:, 1] * nt.xi[:, 1])
    return R1, R2
