"""TOML configuration: schema validation, dotted-path overrides, and
construction of a runnable Model.

Schema (defaults in parentheses; SI units everywhere):

[geometry]      nx, ny (int >= 1); dx, thickness [m]; horizon_factor (2.05);
                notch = [x0, y0, x1, y1] optional pre-broken segment [m]
[material]      model = "viscoplastic" | "maxwell_viscoelastic" | "bond_viscoelastic";
                E, nu, mu_c [Pa]; l [m]; rho [kg/m^3];
                density_kind = "partial" ("intrinsic" multiplies by phi0); phi0 (1.0);
                micro_inertia [kg/m] (rho^s l^2); tau_r [s] (inf);
                viscoplastic only: c0, h [Pa]; friction_deg, dilation_deg [deg];
                eta [Pa s]; a1 (0.25), a2 (0.25), a3 (0.5);
                substep_target (1e-4), max_substeps (20);
                optional [material.weak_zone]: center = [x, y] [m],
                radius [m], cohesion_factor — cohesion seed for
                localization under otherwise symmetric conditions
[stabilization] G1 (0.0), G2 (0.0) — correspondence channel only
[damage]        mode = "none" | "bilinear" | "energy"; bilinear: s0, sc;
                energy: g_cr [N/m] or k_i [Pa sqrt(m)]
[time]          dt [s]; n_steps (int >= 0)
[[loading]]     kind = "kinematic": region|box, dof = "ux"|"uy"|"omega",
                law = "fixed" (value, 0.0) | "ramp" (rate [m/s]) |
                "cosine" (amplitude [m], t1 [s]); depth (rows, ceil(horizon_factor));
                kind = "traction": region, law = "constant" | "ramp_hold",
                value [Pa] (tension positive), t0 [s] for ramp_hold
[measure]       kind = "reaction" | "applied"; region or box + normal
                ("+x"|"-x"|"+y"|"-y"); depth (as kinematic)
[output]        snapshot_every (0 = initial/final only); directory ("output");
                format = "csv" | "vtk" | "both" ("csv")

Regions are the side strips "top", "bottom", "left", "right" or an
axis-aligned box [x0, x1, y0, y1].  Unknown keys anywhere are errors.
"""

from __future__ import annotations

import copy
import math
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import dynamics as dyn
from .constitutive import ElasticModuli, ViscoplasticParams
from .damage import DamageParams, critical_energy_release_rate, critical_pair_work
from .errors import ConfigError
from .grid import boundary_region_mask, build_grid, find_neighbors, \
    invert_shape_tensor, shape_tensor

_SIDES = ("top", "bottom", "left", "right")
_MODELS = ("viscoplastic", "maxwell_viscoelastic", "bond_viscoelastic")


def load_config(path, overrides=()) -> dict:
    """Parse and validate a TOML config file, applying ``key.path=value``
    overrides before validation."""
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config file {path} is not valid TOML: {e}")
    if overrides:
        apply_overrides(raw, overrides)
    return validate_config(raw)


def _check_keys(table: dict, allowed, where: str):
    for k in table:
        if k not in allowed:
            raise ConfigError(f"unknown key {where}.{k}")


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key {where}.{key}")
    return table[key]


def _number(table, key, where, default=None, minimum=None, strict_min=False,
            maximum=None):
    if key not in table:
        if default is None:
            raise ConfigError(f"missing required key {where}.{key}")
        return float(default)
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    v = float(v)
    if minimum is not None and (v < minimum or (strict_min and v == minimum)):
        cmp = ">" if strict_min else ">="
        raise ConfigError(f"{where}.{key} must be {cmp} {minimum}, got {v}")
    if maximum is not None and v > maximum:
        raise ConfigError(f"{where}.{key} must be <= {maximum}, got {v}")
    return v


def _integer(table, key, where, default=None, minimum=None):
    if key not in table:
        if default is None:
            raise ConfigError(f"missing required key {where}.{key}")
        return int(default)
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}.{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}, got {v}")
    return v


def _choice(table, key, where, options, default=None):
    if key not in table:
        if default is None:
            raise ConfigError(f"missing required key {where}.{key}")
        return default
    v = table[key]
    if v not in options:
        raise ConfigError(f"{where}.{key} must be one of {options}, got {v!r}")
    return v


def _region_keys(entry: dict, where: str):
    """Validate the region/box selector of a loading or measure table."""
    has_region = "region" in entry
    has_box = "box" in entry
    if has_region == has_box:
        raise ConfigError(f"{where} needs exactly one of 'region' or 'box'")
    if has_region and entry["region"] not in _SIDES:
        raise ConfigError(f"{where}.region must be one of {_SIDES}, got {entry['region']!r}")
    if has_box:
        box = entry["box"]
        if (not isinstance(box, list) or len(box) != 4
                or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in box)):
            raise ConfigError(f"{where}.box must be [x0, x1, y0, y1]")
        if box[1] <= box[0] or box[3] <= box[2]:
            raise ConfigError(f"{where}.box must satisfy x0 < x1 and y0 < y1")


def validate_config(raw: dict) -> dict:
    """Check every key and fill defaults; returns a normalized deep copy."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    cfg = copy.deepcopy(raw)
    _check_keys(cfg, ("geometry", "material", "stabilization", "damage",
                      "time", "loading", "measure", "output"), "config")

    # --- geometry
    g = cfg.get("geometry")
    if not isinstance(g, dict):
        raise ConfigError("missing required table [geometry]")
    _check_keys(g, ("nx", "ny", "dx", "thickness", "horizon_factor", "notch"), "geometry")
    g["nx"] = _integer(g, "nx", "geometry", minimum=1)
    g["ny"] = _integer(g, "ny", "geometry", minimum=1)
    g["dx"] = _number(g, "dx", "geometry", minimum=0.0, strict_min=True)
    g["thickness"] = _number(g, "thickness", "geometry", minimum=0.0, strict_min=True)
    g["horizon_factor"] = _number(g, "horizon_factor", "geometry", default=2.05,
                                  minimum=1.0)
    if "notch" in g:
        notch = g["notch"]
        if (not isinstance(notch, list) or len(notch) != 4
                or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in notch)):
            raise ConfigError("geometry.notch must be [x0, y0, x1, y1]")
        g["notch"] = [float(c) for c in notch]

    # --- material
    m = cfg.get("material")
    if not isinstance(m, dict):
        raise ConfigError("missing required table [material]")
    base = ("model", "E", "nu", "mu_c", "l", "rho", "density_kind", "phi0",
            "micro_inertia", "tau_r")
    vp_keys = ("c0", "h", "friction_deg", "dilation_deg", "eta",
               "a1", "a2", "a3", "substep_target", "max_substeps", "weak_zone")
    _check_keys(m, base + vp_keys, "material")
    m["model"] = _choice(m, "model", "material", _MODELS)
    m["E"] = _number(m, "E", "material", minimum=0.0, strict_min=True)
    m["nu"] = _number(m, "nu", "material")
    m["mu_c"] = _number(m, "mu_c", "material", minimum=0.0)
    m["l"] = _number(m, "l", "material", minimum=0.0, strict_min=True)
    m["rho"] = _number(m, "rho", "material", minimum=0.0, strict_min=True)
    m["density_kind"] = _choice(m, "density_kind", "material",
                                ("partial", "intrinsic"), default="partial")
    m["phi0"] = _number(m, "phi0", "material", default=1.0)
    m["tau_r"] = _number(m, "tau_r", "material", default=math.inf, minimum=0.0,
                         strict_min=True)
    if m["model"] == "viscoplastic":
        m["c0"] = _number(m, "c0", "material")
        m["h"] = _number(m, "h", "material")
        m["friction_deg"] = _number(m, "friction_deg", "material")
        m["dilation_deg"] = _number(m, "dilation_deg", "material")
        m["eta"] = _number(m, "eta", "material")
        m["a1"] = _number(m, "a1", "material", default=0.25)
        m["a2"] = _number(m, "a2", "material", default=0.25)
        m["a3"] = _number(m, "a3", "material", default=0.5)
        m["substep_target"] = _number(m, "substep_target", "material", default=1e-4)
        m["max_substeps"] = _integer(m, "max_substeps", "material", default=20, minimum=1)
        if "weak_zone" in m:
            wz = m["weak_zone"]
            if not isinstance(wz, dict):
                raise ConfigError("material.weak_zone must be a table")
            _check_keys(wz, ("center", "radius", "cohesion_factor"),
                        "material.weak_zone")
            c = wz.get("center")
            if (not isinstance(c, list) or len(c) != 2
                    or any(isinstance(v, bool) or not isinstance(v, (int, float))
                           for v in c)):
                raise ConfigError("material.weak_zone.center must be [x, y]")
            wz["center"] = [float(v) for v in c]
            wz["radius"] = _number(wz, "radius", "material.weak_zone",
                                   minimum=0.0, strict_min=True)
            wz["cohesion_factor"] = _number(wz, "cohesion_factor",
                                            "material.weak_zone",
                                            minimum=0.0, strict_min=True)
    else:
        for k in vp_keys:
            if k in m:
                raise ConfigError(f"material.{k} only applies to model = 'viscoplastic'")

    # --- stabilization
    s = cfg.setdefault("stabilization", {})
    if not isinstance(s, dict):
        raise ConfigError("[stabilization] must be a table")
    _check_keys(s, ("G1", "G2"), "stabilization")
    s["G1"] = _number(s, "G1", "stabilization", default=0.0, minimum=0.0)
    s["G2"] = _number(s, "G2", "stabilization", default=0.0, minimum=0.0)

    # --- damage
    d = cfg.setdefault("damage", {})
    if not isinstance(d, dict):
        raise ConfigError("[damage] must be a table")
    _check_keys(d, ("mode", "s0", "sc", "g_cr", "k_i"), "damage")
    d["mode"] = _choice(d, "mode", "damage", ("none", "bilinear", "energy"),
                        default="none")
    if d["mode"] == "bilinear":
        d["s0"] = _number(d, "s0", "damage", minimum=0.0, strict_min=True)
        d["sc"] = _number(d, "sc", "damage", minimum=0.0, strict_min=True)
        for k in ("g_cr", "k_i"):
            if k in d:
                raise ConfigError(f"damage.{k} only applies to mode = 'energy'")
    elif d["mode"] == "energy":
        if "g_cr" not in d and "k_i" not in d:
            raise ConfigError("damage mode 'energy' requires damage.g_cr or damage.k_i")
        if "g_cr" in d and "k_i" in d:
            raise ConfigError("give only one of damage.g_cr or damage.k_i")
        for k in ("s0", "sc"):
            if k in d:
                raise ConfigError(f"damage.{k} only applies to mode = 'bilinear'")
        if "g_cr" in d:
            d["g_cr"] = _number(d, "g_cr", "damage", minimum=0.0, strict_min=True)
        else:
            d["k_i"] = _number(d, "k_i", "damage", minimum=0.0, strict_min=True)
    else:
        for k in ("s0", "sc", "g_cr", "k_i"):
            if k in d:
                raise ConfigError(f"damage.{k} requires a damage mode")

    # --- time
    t = cfg.get("time")
    if not isinstance(t, dict):
        raise ConfigError("missing required table [time]")
    _check_keys(t, ("dt", "n_steps"), "time")
    t["dt"] = _number(t, "dt", "time", minimum=0.0, strict_min=True)
    t["n_steps"] = _integer(t, "n_steps", "time", minimum=0)

    # --- loading
    loading = cfg.setdefault("loading", [])
    if not isinstance(loading, list):
        raise ConfigError("[[loading]] must be an array of tables")
    for idx, entry in enumerate(loading):
        where = f"loading.{idx}"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} must be a table")
        kind = _choice(entry, "kind", where, ("kinematic", "traction"))
        if kind == "kinematic":
            _check_keys(entry, ("kind", "region", "box", "depth", "dof", "law",
                                "value", "rate", "amplitude", "t1"), where)
            _region_keys(entry, where)
            if "depth" in entry:
                entry["depth"] = _integer(entry, "depth", where, minimum=1)
            _choice(entry, "dof", where, ("ux", "uy", "omega"))
            law = _choice(entry, "law", where, ("fixed", "ramp", "cosine"))
            if law == "fixed":
                entry["value"] = _number(entry, "value", where, default=0.0)
                for k in ("rate", "amplitude", "t1"):
                    if k in entry:
                        raise ConfigError(f"{where}.{k} does not apply to law = 'fixed'")
            elif law == "ramp":
                entry["rate"] = _number(entry, "rate", where)
                for k in ("value", "amplitude", "t1"):
                    if k in entry:
                        raise ConfigError(f"{where}.{k} does not apply to law = 'ramp'")
            else:
                entry["amplitude"] = _number(entry, "amplitude", where)
                entry["t1"] = _number(entry, "t1", where, minimum=0.0, strict_min=True)
                for k in ("value", "rate"):
                    if k in entry:
                        raise ConfigError(f"{where}.{k} does not apply to law = 'cosine'")
        else:
            _check_keys(entry, ("kind", "region", "law", "value", "t0"), where)
            if "region" not in entry or entry["region"] not in _SIDES:
                raise ConfigError(f"{where}.region must be one of {_SIDES}")
            law = _choice(entry, "law", where, ("constant", "ramp_hold"))
            entry["value"] = _number(entry, "value", where)
            if law == "ramp_hold":
                entry["t0"] = _number(entry, "t0", where, minimum=0.0, strict_min=True)
            elif "t0" in entry:
                raise ConfigError(f"{where}.t0 does not apply to law = 'constant'")

    # --- measure
    if "measure" in cfg:
        meas = cfg["measure"]
        if not isinstance(meas, dict):
            raise ConfigError("[measure] must be a table")
        _check_keys(meas, ("kind", "region", "box", "normal", "depth"), "measure")
        _choice(meas, "kind", "measure", ("reaction", "applied"))
        _region_keys(meas, "measure")
        if "box" in meas:
            _choice(meas, "normal", "measure", ("+x", "-x", "+y", "-y"))
        elif "normal" in meas:
            raise ConfigError("measure.normal only applies with measure.box")
        if "depth" in meas:
            meas["depth"] = _integer(meas, "depth", "measure", minimum=1)

    # --- output
    out = cfg.setdefault("output", {})
    if not isinstance(out, dict):
        raise ConfigError("[output] must be a table")
    _check_keys(out, ("snapshot_every", "directory", "format"), "output")
    out["snapshot_every"] = _integer(out, "snapshot_every", "output", default=0, minimum=0)
    out["directory"] = out.get("directory", "output")
    if not isinstance(out["directory"], str):
        raise ConfigError("output.directory must be a string")
    out["format"] = _choice(out, "format", "output", ("csv", "vtk", "both"),
                            default="csv")
    return cfg


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``dotted.path=value`` overrides onto a raw config dict.

    List elements are addressed by index or by the wildcard '*', which
    fans out over every element (e.g. ``loading.*.rate=0.1``).  Values
    are parsed as TOML scalars; anything unparsable is kept as a string.
    The result must be re-validated.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.path=value")
        path, _, text = item.partition("=")
        keys = path.strip().split(".")
        if not all(keys):
            raise ConfigError(f"override {item!r} has an empty path component")
        try:
            value = tomllib.loads(f"v = {text.strip()}")["v"]
        except tomllib.TOMLDecodeError:
            value = text.strip()
        for target, last in _walk_override(cfg, keys, path.strip()):
            target[last] = value
    return cfg


def _walk_override(node, keys, full):
    """Yield (container, final_key) pairs for an override path."""
    head, rest = keys[0], keys[1:]
    if isinstance(node, list):
        if head == "*":
            picks = list(range(len(node)))
        else:
            try:
                picks = [int(head)]
            except ValueError:
                raise ConfigError(f"override path {full!r}: list index expected, got {head!r}")
            if not -len(node) <= picks[0] < len(node):
                raise ConfigError(f"override path {full!r}: index {head} out of range")
        for p in picks:
            if rest:
                yield from _walk_override(node[p], rest, full)
            else:
                raise ConfigError(f"override path {full!r} cannot replace a whole table")
        return
    if not isinstance(node, dict):
        raise ConfigError(f"override path {full!r} descends into a scalar")
    if not rest:
        yield node, head
        return
    if head not in node:
        # allow creating optional intermediate tables only when spelled exactly
        raise ConfigError(f"override path {full!r}: unknown table {head!r}")
    yield from _walk_override(node[head], rest, full)


# ----------------------------------------------------------------------
# model construction


def _mask_for(entry, points, default_depth):
    if "region" in entry:
        depth = entry.get("depth", default_depth)
        mask = boundary_region_mask(points, entry["region"], depth)
    else:
        x0, x1, y0, y1 = entry["box"]
        eps = 1e-9 * points.dx
        p = points.position
        mask = ((p[:, 0] >= x0 - eps) & (p[:, 0] <= x1 + eps)
                & (p[:, 1] >= y0 - eps) & (p[:, 1] <= y1 + eps))
    if not np.any(mask):
        raise ConfigError(f"region {entry.get('region', entry.get('box'))!r} "
                          "selects no points in the domain")
    return mask


_NORMALS = {"+x": (1.0, 0.0), "-x": (-1.0, 0.0), "+y": (0.0, 1.0), "-y": (0.0, -1.0)}


def build_model(cfg: dict) -> dyn.Model:
    """Turn a validated config into a Model ready for Simulation."""
    g, m, s, d, t = (cfg["geometry"], cfg["material"], cfg["stabilization"],
                     cfg["damage"], cfg["time"])
    moduli = ElasticModuli(E=m["E"], nu=m["nu"], mu_c=m["mu_c"], l=m["l"])
    points = build_grid(g["nx"], g["ny"], g["dx"], g["thickness"], m["rho"],
                        density_kind=m["density_kind"], phi0=m["phi0"],
                        micro_inertia=m.get("micro_inertia"), length_scale=m["l"])
    delta = g["horizon_factor"] * g["dx"]
    nt = find_neighbors(points, delta)
    # fail fast on degenerate neighborhoods (raises for ill-posed grids)
    invert_shape_tensor(shape_tensor(nt, points.volume, np.ones(nt.n_bonds)),
                        strict=True)

    c_scale = None
    if m["model"] == "viscoplastic":
        formulation, material_model = "correspondence", "viscoplastic"
        vp = ViscoplasticParams(c0=m["c0"], h=m["h"], friction_deg=m["friction_deg"],
                                dilation_deg=m["dilation_deg"], eta=m["eta"],
                                a1=m["a1"], a2=m["a2"], a3=m["a3"],
                                substep_target=m["substep_target"],
                                max_substeps=m["max_substeps"])
        if "weak_zone" in m:
            wz = m["weak_zone"]
            r = np.hypot(points.position[:, 0] - wz["center"][0],
                         points.position[:, 1] - wz["center"][1])
            inside = r <= wz["radius"]
            if not np.any(inside):
                raise ConfigError("material.weak_zone selects no points in the domain")
            c_scale = np.where(inside, wz["cohesion_factor"], 1.0)
    elif m["model"] == "maxwell_viscoelastic":
        formulation, material_model, vp = "correspondence", "maxwell", None
    else:
        formulation, material_model, vp = "bond", "maxwell", None

    if d["mode"] == "bilinear":
        damage = DamageParams(mode="bilinear", s0=d["s0"], sc=d["sc"])
    elif d["mode"] == "energy":
        g_cr = d["g_cr"] if "g_cr" in d else \
            critical_energy_release_rate(d["k_i"], m["E"], m["nu"])
        damage = DamageParams(mode="energy", w_cr=critical_pair_work(g_cr, delta))
    else:
        damage = DamageParams()

    default_depth = math.ceil(g["horizon_factor"])
    kinematic, tractions = [], []
    for entry in cfg["loading"]:
        if entry["kind"] == "kinematic":
            mask = _mask_for(entry, points, default_depth)
            law = entry["law"]
            if law == "fixed":
                kl = dyn.KinematicLaw("fixed", entry["value"])
            elif law == "ramp":
                kl = dyn.KinematicLaw("ramp", entry["rate"])
            else:
                kl = dyn.KinematicLaw("cosine", entry["amplitude"], entry["t1"])
            kinematic.append(dyn.KinematicBC(mask, dyn._DOF[entry["dof"]], kl))
        else:
            mask = _mask_for(entry, points, 1)
            normal = np.array(_NORMALS[{"top": "+y", "bottom": "-y",
                                        "left": "-x", "right": "+x"}[entry["region"]]])
            fd = normal * (entry["value"] / g["dx"])
            tractions.append(dyn.TractionBC(mask, fd, entry["law"],
                                            entry.get("t0", 0.0)))

    measure = None
    if "measure" in cfg:
        mc = cfg["measure"]
        mask = _mask_for(mc, points, default_depth)
        if "region" in mc:
            normal = np.array(_OUT_BY_SIDE[mc["region"]])
        else:
            normal = np.array(_NORMALS[mc["normal"]])
        measure = dyn.Measure(mask, normal, mc["kind"])

    return dyn.Model(
        points=points, nt=nt, moduli=moduli,
        formulation=formulation, material_model=material_model,
        dt=t["dt"], n_steps=t["n_steps"], tau_r=m["tau_r"],
        G1=s["G1"], G2=s["G2"], vp_params=vp, cohesion_scale=c_scale,
        damage_params=damage,
        kinematic=kinematic, tractions=tractions, measure=measure,
        notch=tuple(g["notch"]) if "notch" in g else None,
    )


_OUT_BY_SIDE = {"top": (0.0, 1.0), "bottom": (0.0, -1.0),
                "left": (-1.0, 0.0), "right": (1.0, 0.0)}
