"""Command-line interface.

    cosseratpd run <config.toml>  [--output DIR] [--threads N]
                                  [--format csv|vtk|both] [--override k=v ...]
    cosseratpd preset <name>      [same options]
    cosseratpd metrics <run-dir>

Exit codes: 0 success, 2 configuration error, 3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import build_model, load_config
from .dynamics import Simulation
from .errors import ConfigError, DegenerateNeighborhoodError, NumericalBreakdownError
from .metrics import directory_metrics, measure_band_angle, measure_branch_timing
from .output import write_history, write_snapshot, write_summary
from .scenarios import preset_config, preset_names


def _add_run_options(p):
    p.add_argument("--output", help="output directory (default from config)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for the per-bond kernels (default 1)")
    p.add_argument("--format", choices=("csv", "vtk", "both"),
                   help="snapshot format (default from config)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="config override, e.g. material.phi0=0.85 or loading.*.t0=2.5e-6")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cosseratpd",
        description="2D micropolar bond-lattice dynamics: shear banding and "
                    "crack branching in dry porous media.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("config", help="TOML config file")
    _add_run_options(p_run)

    p_pre = sub.add_parser("preset", help="run a shipped example preset")
    p_pre.add_argument("name", choices=preset_names())
    _add_run_options(p_pre)

    p_met = sub.add_parser("metrics", help="band angle / branch timing of a run directory")
    p_met.add_argument("directory")
    return parser


def _summarize(sim: Simulation) -> dict:
    model = sim.model
    hist = sim.history
    reactions = [row[2] for row in hist]
    audits = [row[6] for row in hist]
    summary = {
        "n_steps": sim.step_index,
        "final_time_us": sim.time * 1e6,
        "audit_pass": bool(all(audits)),
        "audit_failures": int(sum(1 for ok in audits if not ok)),
        "reaction_final_N": reactions[-1],
        "reaction_peak_N": max(reactions, key=abs),
        "W_int": sim.W_int, "W_ext": sim.W_ext, "W_kin": sim.W_kin,
    }
    snap = sim.snapshot()
    band = measure_band_angle(snap)
    summary["band"] = band
    if model.damage_params.mode != "none" and sim.damage_series:
        times = [t for t, _ in sim.damage_series]
        fields = [d for _, d in sim.damage_series]
        x_notch = max(model.notch[0], model.notch[2]) if model.notch else None
        summary["branch"] = measure_branch_timing(
            times, fields, model.points.position, dx=model.points.dx,
            x_notch=x_notch)
    else:
        summary["branch"] = None
    return summary


def _execute(cfg, args) -> int:
    if args.output is not None:
        cfg["output"]["directory"] = args.output
    if args.format is not None:
        cfg["output"]["format"] = args.format
    model = build_model(cfg)
    outdir = cfg["output"]["directory"]
    fmt = cfg["output"]["format"]
    every = cfg["output"]["snapshot_every"]
    os.makedirs(outdir, exist_ok=True)

    with Simulation(model, n_threads=args.threads) as sim:
        write_snapshot(outdir, 0, sim.snapshot(), fmt)

        def on_step(s):
            if every > 0 and s.step_index % every == 0 \
                    and s.step_index != model.n_steps:
                write_snapshot(outdir, s.step_index, s.snapshot(), fmt)

        try:
            sim.run(on_step)
        finally:
            write_history(os.path.join(outdir, "history.csv"), sim.history)
        if model.n_steps > 0:
            write_snapshot(outdir, sim.step_index, sim.snapshot(), fmt)
        write_summary(os.path.join(outdir, "summary.json"), _summarize(sim))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config, args.override)
            return _execute(cfg, args)
        if args.command == "preset":
            cfg = preset_config(args.name, args.override)
            return _execute(cfg, args)
        result = directory_metrics(args.directory)
        json.dump(result, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0
    except (ConfigError, DegenerateNeighborhoodError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except NumericalBreakdownError as e:
        print(f"numerical breakdown: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
