"""Command-line entry point: ``magdeg simulate|calibrate|stefan1d|probe``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .calibration import CalibrationProblem, optimize
from .config import load_config
from .errors import MagdegError
from .interface import StefanParams, stefan_alpha, stefan_front
from .observables import ph_field, probe_line


def _point(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return vals


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_simulate(args):
    from .simulation import run_simulation

    cfg = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    binary = not args.ascii_vtk

    def snapshot(step, state, phi):
        io.export_vtk(state, phi, out / f"snapshot_{step:05d}.vtk", binary, cfg.c_oh0)

    result = run_simulation(cfg, check=args.check, on_snapshot=snapshot)
    io.export_csv(result.series, out / "series.csv")
    io.export_vtk(result.final_state, result.final_phi, out / "final.vtk", binary, cfg.c_oh0)
    d = result.diagnostics
    last = result.series.rows()[-1]
    print(f"t={last[0]:g} h  mass_lost={last[1]:.6g} g  H2={last[2]:.6g} mL  "
          f"avg_pH={last[3]:.4f}  ({d.wall_time:.1f} s, {d.clipped} clipped values, "
          f"max {max(d.subcycles, default=1)} advection substeps)")
    return 0


def cmd_calibrate(args):
    cfg = _load(args)
    cal = cfg.calibration
    if not cal.free_params:
        print("config has no [calibration] free parameters", file=sys.stderr)
        return 2
    problem = CalibrationProblem(cal.free_params, io.read_reference_csv(args.reference),
                                 cfg.materials, cfg, cal.k2_grid, cal.budget)
    best_x, best_y, trace = optimize(problem, seed=cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    best = dict(zip((*problem.names, "k2"), best_x))
    best["objective_rmse_ml"] = best_y
    (out / "best_params.json").write_text(json.dumps(best, indent=2) + "\n")
    io.write_trace_csv(trace, problem.names, out / "trace.csv")
    print(json.dumps(best, indent=2))
    return 0


def cmd_stefan1d(args):
    cfg = _load(args)
    p = cfg.materials
    sp = StefanParams.from_material(p)
    alpha = stefan_alpha(sp)
    print(f"alpha = {alpha:.12g} mm/sqrt(h)  (D = {sp.D:g} mm^2/h)")
    times = np.unique(np.append(np.arange(0.0, cfg.t_end, 1.0), cfg.t_end))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("time_h", "front_mm", "displacement_mm"))
    for t in times:
        s = stefan_front(0.0, alpha, t)
        w.writerow((f"{t:g}", f"{s:.9g}", f"{abs(s):.9g}"))
    return 0


def cmd_probe(args):
    _load(args)
    state, phi = io.load_snapshot(args.snapshot)
    fields = {"c_mg": state.c_mg, "c_film": state.c_film, "c_cl": state.c_cl,
              "c_oh": state.c_oh, "phi": phi.field, "ph": ph_field(state.c_oh)}
    samples = probe_line(fields[args.field], getattr(args, "from"), args.to, args.n)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fh = open(out / f"probe_{args.field}.csv", "w", newline="")
    else:
        fh = sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("distance_mm", args.field))
        for d, v in samples:
            w.writerow((repr(d), repr(v)))
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser = argparse.ArgumentParser(prog="magdeg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a simulation, write CSV and VTK")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.add_argument("--check", action="store_true", help="assert per-step invariants")
    p.add_argument("--ascii-vtk", action="store_true", help="write ASCII instead of binary VTK")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", parents=[common], help="fit parameters to an H2 curve")
    p.add_argument("config")
    p.add_argument("reference", help="CSV with time_h,hydrogen_ml columns")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("stefan1d", parents=[common], help="print alpha and the 1D front table")
    p.add_argument("config")
    p.set_defaults(func=cmd_stefan1d)

    p = sub.add_parser("probe", parents=[common], help="sample a snapshot along a line")
    p.add_argument("config")
    p.add_argument("snapshot")
    p.add_argument("--from", type=_point, required=True, metavar="X,Y,Z")
    p.add_argument("--to", type=_point, required=True, metavar="X,Y,Z")
    p.add_argument("-n", type=int, default=50)
    p.add_argument("--field", default="c_mg",
                   choices=("c_mg", "c_film", "c_cl", "c_oh", "phi", "ph"))
    p.add_argument("--out", default=None, help="directory for probe CSV (stdout if omitted)")
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MagdegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
