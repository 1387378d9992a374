"""Artifact writers and readers: history CSV, per-point snapshot CSV,
legacy-VTK point clouds, and the run summary JSON.

All floating-point values are written with %.17g so that reading a CSV
back reproduces the original doubles bit for bit.
"""

from __future__ import annotations

import json
import os

import numpy as np

SNAPSHOT_COLUMNS = ("id", "x", "y", "ux", "uy", "vx", "vy", "omega",
                    "exx", "exy", "eyx", "eyy", "gamma_p", "epsv_p",
                    "eps_hat", "damage", "d2work")

HISTORY_COLUMNS = ("step", "time_s", "reaction_force_N",
                   "W_int", "W_ext", "W_kin", "audit_pass")


def write_history(path, rows):
    """Write the per-step history table (one row per recorded step)."""
    with open(path, "w") as f:
        f.write(",".join(HISTORY_COLUMNS) + "\n")
        for step, time, reaction, w_int, w_ext, w_kin, ok in rows:
            f.write("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n"
                    % (step, time, reaction, w_int, w_ext, w_kin, int(ok)))


def read_history(path):
    """History CSV back as a dict of columns."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(HISTORY_COLUMNS))
    return {name: data[:, k] for k, name in enumerate(HISTORY_COLUMNS)}


def write_snapshot_csv(path, snap: dict):
    """Snapshot CSV with the canonical column set, %.17g doubles."""
    cols = [np.asarray(snap[name]) for name in SNAPSHOT_COLUMNS]
    table = np.column_stack(cols)
    fmt = ["%d"] + ["%.17g"] * (len(SNAPSHOT_COLUMNS) - 1)
    np.savetxt(path, table, fmt=fmt, delimiter=",",
               header=",".join(SNAPSHOT_COLUMNS), comments="")


def read_snapshot_csv(path):
    """Snapshot CSV back as a dict of per-point arrays."""
    with open(path) as f:
        header = f.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = {name: data[:, k] for k, name in enumerate(header)}
    if "id" in out:
        out["id"] = out["id"].astype(np.int64)
    return out


def write_snapshot_vtk(path, snap: dict):
    """Legacy-VTK ASCII point cloud mirroring the CSV values exactly."""
    n = len(snap["id"])
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("micropolar point cloud snapshot\n")
        f.write("ASCII\nDATASET POLYDATA\n")
        f.write(f"POINTS {n} double\n")
        x, y = np.asarray(snap["x"]), np.asarray(snap["y"])
        for k in range(n):
            f.write("%.17g %.17g 0\n" % (x[k], y[k]))
        f.write(f"VERTICES {n} {2 * n}\n")
        for k in range(n):
            f.write("1 %d\n" % k)
        f.write(f"POINT_DATA {n}\n")
        for name in SNAPSHOT_COLUMNS:
            if name in ("id", "x", "y"):
                continue
            f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            col = np.asarray(snap[name])
            for k in range(n):
                f.write("%.17g\n" % col[k])


def read_snapshot_vtk(path):
    """Read back the scalar fields of a legacy-VTK snapshot (for tests)."""
    out = {}
    with open(path) as f:
        lines = f.read().split("\n")
    k = 0
    n = 0
    while k < len(lines):
        line = lines[k]
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            pts = np.array([[float(v) for v in lines[k + 1 + m].split()]
                            for m in range(n)])
            out["x"], out["y"] = pts[:, 0], pts[:, 1]
            k += n + 1
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            vals = np.array([float(lines[k + 2 + m]) for m in range(n)])
            out[name] = vals
            k += n + 2
        else:
            k += 1
    return out


def snapshot_filename(step: int, fmt: str) -> str:
    return f"snapshot_{step:07d}.{fmt}"


def write_snapshot(outdir, step, snap, fmt="csv"):
    """Write a snapshot in the requested format(s); returns the paths."""
    paths = []
    if fmt in ("csv", "both"):
        p = os.path.join(outdir, snapshot_filename(step, "csv"))
        write_snapshot_csv(p, snap)
        paths.append(p)
    if fmt in ("vtk", "both"):
        p = os.path.join(outdir, snapshot_filename(step, "vtk"))
        write_snapshot_vtk(p, snap)
        paths.append(p)
    return paths


def write_summary(path, summary: dict):
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
