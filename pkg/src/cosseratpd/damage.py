"""Bond damage: bilinear stretch softening and critical-work breakage.

Damage lives on unordered pairs (both directed bonds of a pair always
carry the same influence value) and is irreversible: the bilinear law is
driven by the historical peak axial stretch, the energy law by the
accumulated pair work density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_INF = float("inf")


def critical_energy_release_rate(K_I: float, E: float, nu: float) -> float:
    """Plane-strain critical energy release rate G_cr = K_I^2 (1 - nu^2) / E."""
    return K_I ** 2 * (1.0 - nu ** 2) / E


def critical_pair_work(G_cr: float, delta: float) -> float:
    """Critical pair work density w_cr = 4 G_cr / (pi delta^4) [J/m^6].

    Breaking every pair crossing a unit crack advance at this threshold
    dissipates G_cr per unit area.
    """
    return 4.0 * G_cr / (np.pi * delta ** 4)


@dataclass(frozen=True)
class DamageParams:
    """mode: 'none', 'bilinear' (s0/sc stretch thresholds) or 'energy' (w_cr).

    Infinite thresholds disable degradation while keeping the bookkeeping,
    which must leave the mechanics bit-identical to mode='none'.
    """

    mode: str = "none"
    s0: float = _INF
    sc: float = _INF
    w_cr: float = _INF

    def __post_init__(self):
        if self.mode not in ("none", "bilinear", "energy"):
            raise ConfigError(f"damage.mode must be none/bilinear/energy, got {self.mode!r}")
        if self.mode == "bilinear":
            if self.s0 <= 0.0 or self.sc <= 0.0:
                raise ConfigError("damage.s0 and damage.sc must be positive")
            if np.isfinite(self.s0) and np.isfinite(self.sc) and self.sc < self.s0:
                raise ConfigError("damage.sc must be >= damage.s0")
        if self.mode == "energy" and self.w_cr <= 0.0:
            raise ConfigError("damage.w_cr must be positive")


class DamageState:
    """Mutable per-pair damage history (P = number of unordered pairs)."""

    def __init__(self, n_pairs: int, params: DamageParams):
        self.params = params
        self.omega = np.ones(n_pairs)
        self.broken = np.zeros(n_pairs, dtype=bool)
        self.s1_peak = np.zeros(n_pairs)
        self.work = np.zeros(n_pairs)
        self._power_prev = np.zeros(n_pairs)
        self.changed = False  # any omega change since last reset

    def break_pairs(self, mask: np.ndarray):
        """Sever pairs outright (initial notches)."""
        if np.any(mask):
            self.broken |= mask
            self.omega[mask] = 0.0
            self.changed = True

    def update_bilinear(self, s1_pair: np.ndarray):
        p = self.params
        np.maximum(self.s1_peak, s1_pair, out=self.s1_peak)
        if not np.isfinite(p.s0):
            return
        if p.sc > p.s0 and np.isfinite(p.sc):
            w = (p.sc - np.maximum(self.s1_peak, p.s0)) / (p.sc - p.s0)
            np.clip(w, 0.0, 1.0, out=w)
        else:
            # degenerate sc == s0 (or infinite sc with finite s0 never
            # degrades): step from 1 to 0 at the threshold
            if not np.isfinite(p.sc):
                return
            w = np.where(self.s1_peak >= p.sc, 0.0, 1.0)
        w[self.broken] = 0.0
        if not np.array_equal(w, self.omega):
            self.omega = w
            self.changed = True
        self.broken |= self.s1_peak >= p.sc

    def update_energy(self, pair_power: np.ndarray, dt: float):
        """Trapezoidal accumulation of the pair work density; pairs at or
        above w_cr break (influence drops to zero, no partial softening)."""
        self.work += 0.5 * dt * (self._power_prev + pair_power)
        self._power_prev = pair_power.copy()
        if not np.isfinite(self.params.w_cr):
            return
        newly = ~self.broken & (self.work >= self.params.w_cr)
        if np.any(newly):
            self.broken |= newly
            self.omega[newly] = 0.0
            self.changed = True


def local_damage(nt, omega_pair: np.ndarray, volumes: np.ndarray) -> np.ndarray:
    """Point damage D_i = 1 - sum_j omega_ij V_j / sum_j V_j."""
    Vj = volumes[nt.j]
    n = nt.n_points
    num = np.bincount(nt.i, weights=omega_pair[nt.pair] * Vj, minlength=n)
    den = np.bincount(nt.i, weights=Vj, minlength=n)
    return 1.0 - num / np.where(den > 0.0, den, 1.0)
