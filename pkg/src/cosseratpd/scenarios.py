"""Shipped example presets.

example1  Biaxial compression of a granular specimen with a lateral shear
          driver on the top platen; a single shear band forms and the
          loading curve softens past its peak.
example2  Three-point bending of a notched quasi-brittle beam with the
          bond visco-elastic channel and bilinear stretch damage; the
          crack grows vertically from the notch tip.
example3  Symmetric biaxial compression driving a pair of conjugate shear
          bands; the dilation angle controls their inclination.
example4  Pre-notched plate under suddenly applied tension on both faces;
          the crack runs and then branches (energy breakage criterion).

All values are SI.  Functions return raw config dicts; ``preset_config``
validates and returns the normalized form ready for overrides/building.
"""

from __future__ import annotations

from .config import apply_overrides, validate_config
from .errors import ConfigError


def example1() -> dict:
    E, nu = 50.4e6, 0.4
    mu = E / (2.0 * (1.0 + nu))
    return {
        "geometry": {"nx": 28, "ny": 98, "dx": 1.43e-3, "thickness": 80e-3,
                     "horizon_factor": 2.05},
        "material": {"model": "viscoplastic", "E": E, "nu": nu, "mu_c": 2.0 * mu,
                     "l": 1e-3, "rho": 1650.0, "density_kind": "partial",
                     "phi0": 0.65,
                     "c0": 0.13e6, "h": -1.5e6, "friction_deg": 42.0,
                     "dilation_deg": 33.0, "eta": 0.003e6},
        "stabilization": {"G1": 0.0175, "G2": 0.0017},
        "time": {"dt": 3e-6, "n_steps": 10000},
        "loading": [
            {"kind": "kinematic", "region": "top", "dof": "uy",
             "law": "ramp", "rate": -0.05},
            {"kind": "kinematic", "region": "top", "dof": "ux",
             "law": "ramp", "rate": 0.029},
            {"kind": "kinematic", "region": "bottom", "dof": "uy",
             "law": "ramp", "rate": 0.05},
            {"kind": "kinematic", "region": "bottom", "dof": "ux",
             "law": "fixed"},
            {"kind": "traction", "region": "left", "law": "constant",
             "value": -0.2e6},
            {"kind": "traction", "region": "right", "law": "constant",
             "value": -0.2e6},
        ],
        "measure": {"kind": "reaction", "region": "top"},
        "output": {"snapshot_every": 1000},
    }


def example2() -> dict:
    E, nu = 450e6, 0.2
    mu = E / (2.0 * (1.0 + nu))
    length, depth, dx = 573e-3, 72e-3, 3e-3
    mid = length / 2.0
    pad = 3 * dx
    return {
        "geometry": {"nx": 191, "ny": 24, "dx": dx, "thickness": 60e-3,
                     "horizon_factor": 2.05,
                     "notch": [285e-3, 0.0, 285e-3, 44e-3]},
        "material": {"model": "bond_viscoelastic", "E": E, "nu": nu,
                     "mu_c": mu / 3.0, "l": 2e-3, "rho": 2750.0,
                     "density_kind": "intrinsic", "phi0": 0.89,
                     "tau_r": 8e-3},
        "damage": {"mode": "bilinear", "s0": 0.0043, "sc": 0.056},
        "time": {"dt": 2e-6, "n_steps": 3226},
        "loading": [
            {"kind": "kinematic", "box": [0.0, pad, 0.0, pad],
             "dof": "uy", "law": "fixed"},
            {"kind": "kinematic", "box": [0.0, pad, 0.0, pad],
             "dof": "ux", "law": "fixed"},
            {"kind": "kinematic", "box": [length - pad, length, 0.0, pad],
             "dof": "uy", "law": "fixed"},
            {"kind": "kinematic",
             "box": [mid - 2.5 * dx, mid + 2.5 * dx, depth - pad, depth],
             "dof": "uy", "law": "cosine", "amplitude": -8e-3, "t1": 2.28e-2},
        ],
        "measure": {"kind": "reaction",
                    "box": [mid - 2.5 * dx, mid + 2.5 * dx, depth - pad, depth],
                    "normal": "+y"},
        "output": {"snapshot_every": 500},
    }


def example3() -> dict:
    E, nu = 50e6, 0.2
    mu = E / (2.0 * (1.0 + nu))
    return {
        "geometry": {"nx": 40, "ny": 80, "dx": 2.5e-3, "thickness": 80e-3,
                     "horizon_factor": 2.05},
        "material": {"model": "viscoplastic", "E": E, "nu": nu, "mu_c": 2.0 * mu,
                     "l": 2e-3, "rho": 2000.0, "density_kind": "partial",
                     "phi0": 0.65,
                     "c0": 0.5e6, "h": -1.0e6, "friction_deg": 35.0,
                     "dilation_deg": 20.0, "eta": 0.01e6,
                     # 15% cohesion deficit over ~1.6 grid spacings at the
                     # specimen center; under perfectly symmetric loading
                     # the diffuse solution never bifurcates on its own,
                     # so this seeds the conjugate pair
                     "weak_zone": {"center": [0.05, 0.1], "radius": 4e-3,
                                   "cohesion_factor": 0.85}},
        "stabilization": {"G1": 0.01, "G2": 0.001},
        "time": {"dt": 7e-6, "n_steps": 1428},
        # each platen travels 10 mm over the 1e4 us run (10% closing
        # strain); yield onset sits near 2.8%, and the remaining travel
        # is what lets the conjugate bands localize and soften
        "loading": [
            {"kind": "kinematic", "region": "top", "dof": "uy",
             "law": "ramp", "rate": -1.0},
            {"kind": "kinematic", "region": "bottom", "dof": "uy",
             "law": "ramp", "rate": 1.0},
            {"kind": "traction", "region": "left", "law": "constant",
             "value": -0.1e6},
            {"kind": "traction", "region": "right", "law": "constant",
             "value": -0.1e6},
        ],
        "measure": {"kind": "reaction", "region": "top"},
        "output": {"snapshot_every": 200},
    }


def example4() -> dict:
    E, nu = 35e9, 0.25
    mu = E / (2.0 * (1.0 + nu))
    return {
        "geometry": {"nx": 200, "ny": 80, "dx": 0.5e-3, "thickness": 10e-3,
                     "horizon_factor": 4.05,
                     "notch": [0.0, 20e-3, 50e-3, 20e-3]},
        "material": {"model": "bond_viscoelastic", "E": E, "nu": nu,
                     "mu_c": mu / 3.0, "l": 2e-3, "rho": 2650.0,
                     "density_kind": "intrinsic", "phi0": 0.95,
                     "tau_r": 100e-6},
        "stabilization": {"G1": 0.1, "G2": 0.01},
        "damage": {"mode": "energy", "g_cr": 160.0},
        "time": {"dt": 0.025e-6, "n_steps": 1700},
        "loading": [
            {"kind": "traction", "region": "top", "law": "ramp_hold",
             "value": 8e6, "t0": 6.25e-6},
            {"kind": "traction", "region": "bottom", "law": "ramp_hold",
             "value": 8e6, "t0": 6.25e-6},
        ],
        "measure": {"kind": "applied", "region": "top"},
        "output": {"snapshot_every": 100},
    }


_PRESETS = {"example1": example1, "example2": example2,
            "example3": example3, "example4": example4}


def preset_names():
    return sorted(_PRESETS)


def preset_config(name: str, overrides=()) -> dict:
    """Validated config dict for a shipped preset, with optional
    ``key.path=value`` overrides applied before validation."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    raw = _PRESETS[name]()
    if overrides:
        apply_overrides(raw, overrides)
    return validate_config(raw)
