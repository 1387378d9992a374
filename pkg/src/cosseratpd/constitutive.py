"""Constitutive models: micropolar elasticity, Drucker-Prager/Perzyna
visco-plasticity, Maxwell visco-elasticity, and the bond-based
visco-elastic channel.

Plane strain throughout.  Stress tensors are the in-plane 2x2 blocks plus
the out-of-plane normal component sigma_zz, carried separately so pressure
and deviators use the full 3D trace.  sigma_zz is purely elastic
(lambda*tr eps_e) until dilatant plastic flow produces eps_zz^p, which
relaxes it through the enforced eps_zz^e = -eps_zz^p.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_EYE2 = np.eye(2)


@dataclass(frozen=True)
class ElasticModuli:
    """Isotropic micropolar elastic constants (Cosserat: mu_c couples the
    antisymmetric strain, l sets the couple-stress stiffness 2*mu*l^2)."""

    E: float
    nu: float
    mu_c: float
    l: float

    def __post_init__(self):
        if self.E <= 0.0:
            raise ConfigError("material.E must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ConfigError(f"material.nu must lie in (-1, 0.5), got {self.nu}")
        if self.mu_c < 0.0:
            raise ConfigError("material.mu_c must be non-negative")
        if self.l <= 0.0:
            raise ConfigError("material.l must be positive")

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def couple_modulus(self) -> float:
        """Couple-stress stiffness alpha_m = 2 mu l^2 (2D reduction)."""
        return 2.0 * self.mu * self.l ** 2


def elastic_stress(eps_e, moduli: ElasticModuli, ezz_e=None):
    """Micropolar elastic law sigma = lam tr(e) 1 + (mu+mu_c) e + (mu-mu_c) e^T.

    Returns (sigma, sigma_zz) with sigma shaped like eps_e (..., 2, 2).
    ezz_e is the elastic out-of-plane normal strain: zero under plane
    strain until plastic flow produces eps_zz^p, after which it equals
    -eps_zz^p and relaxes sigma_zz.
    """
    lam, mu, mu_c = moduli.lam, moduli.mu, moduli.mu_c
    tr = eps_e[..., 0, 0] + eps_e[..., 1, 1]
    sig = (mu + mu_c) * eps_e + (mu - mu_c) * np.swapaxes(eps_e, -1, -2)
    if ezz_e is None:
        sig = sig + lam * tr[..., None, None] * _EYE2
        return sig, lam * tr
    tr3 = tr + ezz_e
    sig = sig + lam * tr3[..., None, None] * _EYE2
    return sig, lam * tr3 + 2.0 * mu * ezz_e


def elastic_couple_stress(kappa_e, moduli: ElasticModuli):
    """Couple stress m = 2 mu l^2 kappa_e (out-of-plane rotation only in 2D)."""
    return moduli.couple_modulus * kappa_e


def dp_coefficient(angle_rad):
    """Drucker-Prager cone coefficient A(angle) = 2 sin / (sqrt(3) (3 - sin))."""
    s = np.sin(angle_rad)
    return 2.0 * s / (np.sqrt(3.0) * (3.0 - s))


def cohesion_coefficient(angle_rad):
    """Cohesion factor B = 6 cos(angle) / (3 - sin(angle))."""
    return 6.0 * np.cos(angle_rad) / (3.0 - np.sin(angle_rad))


@dataclass(frozen=True)
class ViscoplasticParams:
    """Perzyna overstress parameters with linear cohesion hardening/softening.

    a1, a2, a3 weight the generalized second invariant
    q^2/3 = a1 s:s + a2 s:s^T + a3 m.m / l^2 (de Borst weights by default).
    """

    c0: float
    h: float
    friction_deg: float
    dilation_deg: float
    eta: float
    a1: float = 0.25
    a2: float = 0.25
    a3: float = 0.5
    substep_target: float = 1e-4
    max_substeps: int = 20

    def __post_init__(self):
        if self.c0 <= 0.0:
            raise ConfigError("viscoplastic.c0 must be positive")
        if self.eta <= 0.0:
            raise ConfigError("viscoplastic.eta must be positive")
        for name in ("friction_deg", "dilation_deg"):
            v = getattr(self, name)
            if not 0.0 <= v < 90.0:
                raise ConfigError(f"viscoplastic.{name} must lie in [0, 90), got {v}")

    @property
    def friction(self) -> float:
        return np.deg2rad(self.friction_deg)

    @property
    def dilation(self) -> float:
        return np.deg2rad(self.dilation_deg)


def cohesion(eps_hat, params: ViscoplasticParams, scale=1.0):
    """Linear cohesion c = scale*c0 + h*eps_hat, floored at 1e-3*scale*c0.

    scale is 1.0 for a homogeneous specimen; a per-point array < 1 models
    a weak zone that seeds localization.
    """
    c0 = scale * params.c0
    return np.maximum(c0 + params.h * eps_hat, 1e-3 * c0)


def _deviator(sigma, sigma_zz):
    """Full-trace deviator: returns (p, s_inplane, s_zz)."""
    p = (sigma[..., 0, 0] + sigma[..., 1, 1] + sigma_zz) / 3.0
    s = sigma - p[..., None, None] * _EYE2
    return p, s, sigma_zz - p


def yield_and_potential(sigma, sigma_zz, m, eps_hat, params: ViscoplasticParams,
                        moduli: ElasticModuli, c_scale=1.0):
    """Evaluate f, g-gradients of the micropolar Drucker-Prager surface.

    Returns dict with f, q, p, dg_dsigma (in-plane 2x2), dg_dm, flow_zz.
    The deviatoric gradient is defined as zero in the q -> 0 limit.
    flow_zz is the out-of-plane plastic flow component: plane-strain
    kinematics confine deviatoric rearrangement to the plane, so the zz
    rate carries only the isotropic dilatant part A3/sqrt(3).
    """
    a1, a2, a3 = params.a1, params.a2, params.a3
    l2 = moduli.l ** 2
    p, s, szz = _deviator(sigma, sigma_zz)
    st = np.swapaxes(s, -1, -2)
    ss = np.einsum("...ab,...ab->...", s, s) + szz ** 2
    sst = np.einsum("...ab,...ba->...", s, s) + szz ** 2
    mm = np.einsum("...a,...a->...", m, m)
    q = np.sqrt(3.0 * np.maximum(a1 * ss + a2 * sst + a3 * mm / l2, 0.0))

    A1 = dp_coefficient(params.friction)
    A3 = dp_coefficient(params.dilation)
    B = cohesion_coefficient(params.friction)
    f = q + np.sqrt(3.0) * A1 * p - B * cohesion(eps_hat, params, c_scale)

    qs = np.where(q > 0.0, q, 1.0)
    scale = np.where(q > 0.0, 3.0 / qs, 0.0)
    dg_dsigma = scale[..., None, None] * (a1 * s + a2 * st) + (A3 / np.sqrt(3.0)) * _EYE2
    dg_dm = (scale * a3 / l2)[..., None] * m
    return {"f": f, "q": q, "p": p, "dg_dsigma": dg_dsigma,
            "flow_zz": A3 / np.sqrt(3.0), "dg_dm": dg_dm}


def _increment_deviator(deps_vp, dzz_vp):
    """Deviatoric invariants of a plastic increment given its in-plane
    2x2 block and out-of-plane normal component.  Returns (de:de, de:de^T)
    including the zz contribution."""
    tr = deps_vp[..., 0, 0] + deps_vp[..., 1, 1] + dzz_vp
    dev = deps_vp - (tr / 3.0)[..., None, None] * _EYE2
    dev_zz = dzz_vp - tr / 3.0
    A = np.einsum("...ab,...ab->...", dev, dev) + dev_zz ** 2
    Bt = np.einsum("...ab,...ba->...", dev, dev) + dev_zz ** 2
    return A, Bt


def equivalent_increment(deps_vp, dzz_vp, dkappa_vp, l):
    """Internal-variable increment driving cohesion softening:

    d_hat = sqrt(1/3 de_s:de_s + 1/3 de_s:de_s^T + 2/3 l^2 dk.dk)
    with de_s the deviator of the plastic strain increment.
    """
    A, Bt = _increment_deviator(deps_vp, dzz_vp)
    kk = np.einsum("...a,...a->...", dkappa_vp, dkappa_vp)
    return np.sqrt(np.maximum(A / 3.0 + Bt / 3.0 + (2.0 / 3.0) * l * l * kk, 0.0))


def plastic_shear_increment(deps_vp, dzz_vp):
    """Equivalent plastic shear strain increment sqrt(0.5 (de_s:de_s + de_s:de_s^T))."""
    A, Bt = _increment_deviator(deps_vp, dzz_vp)
    return np.sqrt(np.maximum(0.5 * (A + Bt), 0.0))


@dataclass
class ViscoplasticState:
    """Mutable per-point history for the visco-plastic correspondence model."""

    eps_vp: np.ndarray     # (N, 2, 2)
    eps_vp_zz: np.ndarray  # (N,) out-of-plane plastic normal strain
    kappa_vp: np.ndarray   # (N, 2)
    eps_hat: np.ndarray    # (N,)
    gamma_p: np.ndarray    # (N,) accumulated equivalent plastic shear strain

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, 2, 2)), np.zeros(n), np.zeros((n, 2)),
                   np.zeros(n), np.zeros(n))


def viscoplastic_update(eps, kappa, state: ViscoplasticState, dt,
                        params: ViscoplasticParams, moduli: ElasticModuli,
                        c_scale=None):
    """Explicit Perzyna update from total strain/wryness at t_{n+1}.

    Single forward step of the overstress flow with uniform sub-stepping
    when the estimated eps_hat increment exceeds the target.  Returns
    (sigma, sigma_zz, m) after plastic correction; state is updated in
    place.  c_scale is an optional per-point cohesion multiplier.
    """
    cs = 1.0 if c_scale is None else c_scale
    eps_e = eps - state.eps_vp
    kap_e = kappa - state.kappa_vp
    sigma, szz = elastic_stress(eps_e, moduli, -state.eps_vp_zz)
    m = elastic_couple_stress(kap_e, moduli)

    ev = yield_and_potential(sigma, szz, m, state.eps_hat, params, moduli, cs)
    plastic = ev["f"] > 0.0
    if not np.any(plastic):
        return sigma, szz, m

    idx = np.nonzero(plastic)[0]
    fmax = float(np.max(ev["f"][idx]))
    n_sub = int(min(max(np.ceil(dt * fmax / params.eta / params.substep_target), 1.0),
                    params.max_substeps))
    h = dt / n_sub

    e_sub = eps[idx] - state.eps_vp[idx]
    ezz_sub = -state.eps_vp_zz[idx]
    k_sub = kappa[idx] - state.kappa_vp[idx]
    hat = state.eps_hat[idx]
    cs_i = cs if np.isscalar(cs) else cs[idx]
    for _ in range(n_sub):
        sig_s, szz_s = elastic_stress(e_sub, moduli, ezz_sub)
        m_s = elastic_couple_stress(k_sub, moduli)
        ev_s = yield_and_potential(sig_s, szz_s, m_s, hat, params, moduli, cs_i)
        gdot = np.maximum(ev_s["f"], 0.0) / params.eta
        deps = (h * gdot)[:, None, None] * ev_s["dg_dsigma"]
        dzz = (h * gdot) * ev_s["flow_zz"]
        dkap = (h * gdot)[:, None] * ev_s["dg_dm"]
        state.eps_vp[idx] += deps
        state.eps_vp_zz[idx] += dzz
        state.kappa_vp[idx] += dkap
        hat = hat + equivalent_increment(deps, dzz, dkap, moduli.l)
        state.gamma_p[idx] += plastic_shear_increment(deps, dzz)
        e_sub -= deps
        ezz_sub = ezz_sub - dzz
        k_sub -= dkap
    state.eps_hat[idx] = hat

    sig_p, szz_p = elastic_stress(e_sub, moduli, ezz_sub)
    sigma[idx] = sig_p
    szz[idx] = szz_p
    m[idx] = elastic_couple_stress(k_sub, moduli)
    return sigma, szz, m


def maxwell_update(sigma, sigma_zz, m, deps, dkappa, dt, tau_r, moduli: ElasticModuli):
    """One step of the Maxwell recurrence with midpoint-weighted increment:

    sigma_{n+1} = e^{-dt/tau} sigma_n + C:deps e^{-dt/(2 tau)}

    and the analogous couple-stress update.  tau_r = inf degenerates to
    the incremental elastic law.
    """
    decay = np.exp(-dt / tau_r)
    half = np.exp(-0.5 * dt / tau_r)
    dsig, dszz = elastic_stress(deps, moduli)
    dm = elastic_couple_stress(dkappa, moduli)
    return (decay * sigma + half * dsig,
            decay * sigma_zz + half * dszz,
            decay * m + half * dm)


# ----------------------------------------------------------------------
# bond-based visco-elastic channel


@dataclass(frozen=True)
class BondConstants:
    """Scalar bond stiffnesses: axial k1, transverse k2, rotational km."""

    k1: float
    k2: float
    km: float


def calibrate_bond_constants(moduli: ElasticModuli, nt, volumes) -> BondConstants:
    """Energy-matching calibration of the bond constants on the actual stencil.

    Matches the stored energy of a uniform isotropic extension exactly and
    the orientation-averaged shear energy, which yields

        k1 = 4 (lam + mu) / I1,   k2 = 4 (mu - lam) / I1,   I1 = sum V|xi|,

    evaluated on the fullest interior family, and km = 2 mu l^2 / K_iso
    with K_iso the isotropic shape-tensor scalar.  k2 vanishes at the
    classical central-force limit nu = 1/4 (plane strain).
    """
    counts = np.bincount(nt.i, minlength=nt.n_points)
    ref = int(np.argmax(counts))
    sel = nt.i == ref
    I1 = float(np.sum(volumes[nt.j[sel]] * nt.r[sel]))
    K_iso = float(np.sum(volumes[nt.j[sel]] * nt.xi[sel, 0] ** 2))
    lam, mu = moduli.lam, moduli.mu
    k2 = 4.0 * (mu - lam) / I1
    if k2 < 0.0:
        # central-force floor: transverse softening below nu=1/4 is not
        # representable by this two-constant channel
        k2 = 0.0
    return BondConstants(k1=4.0 * (lam + mu) / I1, k2=k2, km=moduli.couple_modulus / K_iso)


def bond_stretches(nt, u, w):
    """Axial/transverse stretches and relative rotation per canonical pair.

    s1 = U.n / |xi|  (signed axial stretch)
    s2 = (U.n_perp - wbar |xi|) / |xi|  (signed composite transverse stretch)
    dw = w' - w
    """
    c = nt.canonical
    i, j = nt.i[c], nt.j[c]
    U = u[j] - u[i]
    r = nt.r[c]
    s1 = (U[:, 0] * nt.unit[c, 0] + U[:, 1] * nt.unit[c, 1]) / r
    wbar = 0.5 * (w[i] + w[j])
    s2 = (U[:, 0] * nt.perp[c, 0] + U[:, 1] * nt.perp[c, 1]) / r - wbar
    return s1, s2, w[j] - w[i]


def bond_stretch_rates(nt, v, wdot):
    """Rates of (s1, s2, dw) from velocity fields; same conventions as
    ``bond_stretches`` (signed, mean-rotation convection included)."""
    return bond_stretches(nt, v, wdot)


def bond_viscoelastic_update(t1, t2, tm, ds1, ds2, ddw, dt, tau_r,
                             k: BondConstants):
    """Per-channel Maxwell recurrence on the bond force/moment densities.

    t_{n+1} = e^{-dt/tau} t_n + k * ds * e^{-dt/(2 tau)} for each of the
    axial, transverse and rotational channels (single relaxation time).
    """
    decay = np.exp(-dt / tau_r)
    half = np.exp(-0.5 * dt / tau_r)
    return (decay * t1 + (k.k1 * half) * ds1,
            decay * t2 + (k.k2 * half) * ds2,
            decay * tm + (k.km * half) * ddw)
