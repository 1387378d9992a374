"""Post-processing metrics: shear-band inclination and crack-branch timing.

Band angle: principal-axis (least-squares line) fit through the points
whose equivalent plastic shear strain exceeds a fraction of its maximum.
Conjugate bands carry micro-rotation of opposite sign, so the thresholded
set is split by sign(omega) and fitted per group; the acute angle from
the horizontal axis is reported per band, folded into [0, 90).

Branch timing works on a time series of damage fields: the crack tip is
the rightmost point with D > 0.35 beyond the notch; growth starts when
the tip first advances 2 grid spacings; branching starts when the damaged
set in a slab just behind the tip splits into two vertically separated
row clusters; branching ends at the last tip advance (or when the tip
reaches the boundary).
"""

from __future__ import annotations

import glob
import os

import numpy as np

from .errors import ConfigError
from .output import read_history, read_snapshot_csv


def grid_spacing(positions) -> float:
    """Smallest positive coordinate gap — the lattice spacing."""
    ux = np.unique(positions[:, 0])
    uy = np.unique(positions[:, 1])
    gaps = []
    for u in (ux, uy):
        if u.size > 1:
            d = np.diff(u)
            gaps.append(d[d > 0.0].min())
    if not gaps:
        raise ConfigError("cannot infer grid spacing from a single point")
    return float(min(gaps))


def _principal_angle(xy) -> float:
    """Acute angle (degrees, in [0, 90]) of the dominant axis of a point set."""
    c = xy - xy.mean(axis=0)
    cov = c.T @ c
    evals, evecs = np.linalg.eigh(cov)
    v = evecs[:, np.argmax(evals)]
    ang = np.degrees(np.arctan2(v[1], v[0])) % 180.0
    return 180.0 - ang if ang > 90.0 else ang


def measure_band_angle(snap: dict, threshold_frac: float = 0.5,
                       exclude_margin: float | None = None):
    """Band inclination(s) from a snapshot with gamma_p and omega columns.

    Returns None when no localization exists (max gamma_p == 0), else a
    dict with per-band angles, the mean angle, and the point counts.
    ``exclude_margin`` masks out points within that distance of the top
    and bottom edges (defaults to 3 grid rows — the platen strips).
    """
    gp = np.asarray(snap["gamma_p"])
    if gp.size == 0 or np.max(gp) <= 0.0:
        return None
    pos = np.column_stack([snap["x"], snap["y"]])
    if exclude_margin is None:
        exclude_margin = 3.0 * grid_spacing(pos)
    ylo = pos[:, 1].min() + exclude_margin
    yhi = pos[:, 1].max() - exclude_margin
    sel = (gp >= threshold_frac * np.max(gp)) & (pos[:, 1] > ylo) & (pos[:, 1] < yhi)
    if np.count_nonzero(sel) < 2:
        return None

    w = np.asarray(snap["omega"])
    groups = []
    min_count = max(5, int(0.05 * np.count_nonzero(sel)))
    for gmask in (sel & (w > 0.0), sel & (w < 0.0)):
        if np.count_nonzero(gmask) >= min_count:
            groups.append(gmask)
    if not groups:
        groups = [sel]

    angles = [_principal_angle(pos[g]) for g in groups]
    counts = [int(np.count_nonzero(g)) for g in groups]
    return {"angles": angles, "mean": float(np.mean(angles)),
            "counts": counts, "n_selected": int(np.count_nonzero(sel))}


def measure_branch_timing(times, damage_series, positions, dx=None,
                          x_notch=None, threshold: float = 0.35):
    """Crack growth/branch timestamps from a damage time series.

    times: sequence of times [s]; damage_series: matching sequence of
    per-point damage arrays; positions: (N, 2) reference coordinates.
    Returns dict with growth_start/branch_start/branch_end in microseconds
    (None where the event never happens).
    """
    if len(times) == 0:
        return {"growth_start": None, "branch_start": None, "branch_end": None}
    pos = np.asarray(positions)
    if dx is None:
        dx = grid_spacing(pos)
    if x_notch is None:
        # the pre-broken notch shows up as damage in the first frame
        d0 = np.asarray(damage_series[0]) > threshold
        x_notch = float(np.max(pos[d0, 0])) if np.any(d0) else float(pos[:, 0].min())
    x_edge = pos[:, 0].max()
    y_min = pos[:, 1].min()

    growth = None
    branch = None
    last_advance = None
    tip_prev = -np.inf
    for t, D in zip(times, damage_series):
        ahead = (np.asarray(D) > threshold) & (pos[:, 0] > x_notch + 0.25 * dx)
        if not np.any(ahead):
            continue
        tip = float(np.max(pos[ahead, 0]))
        if tip > tip_prev + 0.25 * dx:
            last_advance = t
            tip_prev = max(tip_prev, tip)
        if growth is None and tip >= x_notch + 2.0 * dx - 0.25 * dx:
            growth = t
        if branch is None:
            slab = ahead & (pos[:, 0] >= tip - 2.0 * dx - 0.25 * dx)
            ys = np.unique(np.round((pos[slab, 1] - y_min) / dx))
            if ys.size >= 2 and np.any(np.diff(ys) >= 2.0 - 0.25):
                branch = t
        if tip >= x_edge - 2.0 * dx:
            # boundary arrival ends the traceable branching stage
            break

    to_us = lambda v: None if v is None else float(v) * 1e6
    return {"growth_start": to_us(growth), "branch_start": to_us(branch),
            "branch_end": to_us(last_advance)}


# ----------------------------------------------------------------------
# disk-based entry point (CLI `metrics` subcommand)


def load_snapshot_series(directory):
    """All CSV snapshots in a run directory, sorted by step, with times
    taken from history.csv when present (else the raw step number)."""
    paths = sorted(glob.glob(os.path.join(directory, "snapshot_*.csv")))
    if not paths:
        raise ConfigError(f"no snapshot_*.csv files found in {directory!r}")
    steps = [int(os.path.basename(p)[len("snapshot_"):-len(".csv")]) for p in paths]
    snaps = [read_snapshot_csv(p) for p in paths]
    hist_path = os.path.join(directory, "history.csv")
    if os.path.exists(hist_path):
        hist = read_history(hist_path)
        t_by_step = dict(zip(hist["step"].astype(int), hist["time_s"]))
        times = [t_by_step.get(s, float(s)) for s in steps]
    else:
        times = [float(s) for s in steps]
    return steps, times, snaps


def directory_metrics(directory) -> dict:
    """Band angle of the last snapshot + branch timing over the series."""
    steps, times, snaps = load_snapshot_series(directory)
    last = snaps[-1]
    pos = np.column_stack([last["x"], last["y"]])
    band = measure_band_angle(last)
    branch = measure_branch_timing(times, [s["damage"] for s in snaps], pos)
    out = {"n_snapshots": len(snaps), "final_step": steps[-1],
           "final_time_us": times[-1] * 1e6,
           "band": band, "branch": branch}
    return out
