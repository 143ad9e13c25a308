"""Command-line interface.

    balloon-eit mesh --profile ellipse --diameter 26 --aspect 0.75 --out dir/
    balloon-eit forward --mesh dir/mesh.vtk --electrodes dir/electrodes.txt \\
        --protocol radial --out dir/
    balloon-eit sweep-spacing --l 5,10,15,20 --out dir/
    balloon-eit sweep-detect --out dir/
    balloon-eit reconstruct --mode ptd --frames f.csv --reference r.csv --out dir/
    balloon-eit experiment config.cfg --out dir/

Global flags: --seed, --resolution, --out.  Exit status 0 on success, 2 on
usage errors, 1 with a diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .errors import BalloonEitError, ParameterError
from .fem import DEFAULT_CURRENT, FemSystem, Frame
from .geometry import CatheterSpec, LumenProfile
from .inverse import (build_recon_mesh, reconstruct_absolute,
                      reconstruct_difference)
from .meshing import build_mesh
from .noise import NoiseModel
from .protocols import Protocol, full_protocol, radial_protocol
from .sweeps import (save_detectability_csv, save_spacing_csv,
                     sweep_detectability, sweep_spacing)
from .vtk_io import read_mesh, write_mesh, write_vtk


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="balloon-eit",
                                description="Balloon-catheter EIT toolkit")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--resolution", type=float, default=1.5,
                   help="target mesh size, mm")
    p.add_argument("--out", default=None, help="output directory")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mesh", help="generate and export a phantom mesh")
    m.add_argument("--profile", choices=("circle", "ellipse", "crescent", "indented"),
                   default="circle")
    m.add_argument("--diameter", type=float, required=True, help="major diameter, mm")
    m.add_argument("--aspect", type=float, default=1.0)
    m.add_argument("--rotation", type=float, default=0.0, help="degrees")
    m.add_argument("--spacing", type=float, default=10.0, help="ring spacing, mm")

    f = sub.add_parser("forward", help="simulate frames for a stored mesh")
    f.add_argument("--mesh", required=True, help="mesh .vtk path")
    f.add_argument("--electrodes", default=None,
                   help="electrode map path (default: mesh path with .electrodes.txt)")
    f.add_argument("--protocol", choices=("radial", "full"), default="full")
    f.add_argument("--sigma", type=float, default=1.6, help="S/m")
    f.add_argument("--current", type=float, default=DEFAULT_CURRENT, help="A")
    f.add_argument("--snr-db", type=float, default=None,
                   help="add noise at this SNR (omit for noiseless)")

    s = sub.add_parser("sweep-spacing", help="ring-spacing optimisation sweep")
    s.add_argument("--l", default="5,10,15,20,25,30,35,40",
                   help="comma-separated spacings, mm")
    s.add_argument("--jobs", type=int, default=None)

    d = sub.add_parser("sweep-detect", help="size/ellipticity detectability sweep")
    d.add_argument("--d-min", type=float, default=12.0)
    d.add_argument("--d-max", type=float, default=30.0)
    d.add_argument("--d-step", type=float, default=1.0)
    d.add_argument("--f-min", type=float, default=0.5)
    d.add_argument("--f-step", type=float, default=0.05)
    d.add_argument("--snr-db", type=float, default=60.0)
    d.add_argument("--jobs", type=int, default=None)

    r = sub.add_parser("reconstruct", help="reconstruct stored frames")
    r.add_argument("--mode", choices=("absolute", "td", "ptd"), required=True)
    r.add_argument("--frames", required=True, help="frames CSV (see forward output)")
    r.add_argument("--reference", default=None,
                   help="reference frames CSV (difference modes)")
    r.add_argument("--frame-index", type=int, default=0)
    r.add_argument("--lambda", dest="lam", type=float, default=None)

    e = sub.add_parser("experiment", help="run a scenario config file")
    e.add_argument("config", help="experiment config path")
    return p


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _profile_from_args(args) -> LumenProfile:
    if args.profile == "ellipse":
        return LumenProfile(kind="ellipse", major_diameter=args.diameter,
                            aspect_ratio=args.aspect, rotation=args.rotation)
    if args.profile == "crescent":
        return LumenProfile(kind="crescent", major_diameter=args.diameter,
                            rotation=args.rotation)
    if args.profile == "indented":
        cath = CatheterSpec(ring_spacing=args.spacing)
        return LumenProfile(kind="indented", major_diameter=args.diameter,
                            rotation=args.rotation,
                            indent_axial_center=0.5 * cath.domain_length())
    return LumenProfile(kind="circle", major_diameter=args.diameter,
                        rotation=args.rotation)


FRAME_CSV_HEADER = ["frame", "row", "inject_pos", "inject_neg", "meas_pos",
                    "meas_neg", "voltage_v"]


def write_frames_csv(path, frames: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FRAME_CSV_HEADER)
        for k, frame in enumerate(frames):
            for r, (ip, im, mp, mm) in enumerate(frame.protocol):
                w.writerow([k, r, ip, im, mp, mm, f"{frame.voltages[r]:.12e}"])


def read_frames_csv(path) -> list:
    """Rebuild frames (and their protocol) from a frames CSV."""
    by_frame: dict[int, list] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != FRAME_CSV_HEADER:
            raise ParameterError(f"unexpected frames CSV header in {path}")
        for rec in reader:
            if not rec:
                continue
            k = int(rec[0])
            by_frame.setdefault(k, []).append(rec[1:])
    frames = []
    for k in sorted(by_frame):
        rows = sorted(by_frame[k], key=lambda r: int(r[0]))
        quad = tuple(tuple(int(v) for v in r[1:5]) for r in rows)
        volts = np.array([float(r[5]) for r in rows])
        frames.append(Frame(Protocol("imported", quad), volts, DEFAULT_CURRENT))
    return frames


def _cmd_mesh(args) -> int:
    out = _out_dir(args)
    cath = CatheterSpec(ring_spacing=args.spacing)
    profile = _profile_from_args(args)
    mesh = build_mesh(profile, cath, args.resolution)
    write_mesh(os.path.join(out, "mesh.vtk"),
               os.path.join(out, "mesh.electrodes.txt"), mesh)
    print(f"mesh: {mesh.n_nodes} nodes, {mesh.n_elements} elements -> {out}/mesh.vtk")
    return 0


def _cmd_forward(args) -> int:
    out = _out_dir(args)
    elec = args.electrodes or args.mesh.replace(".vtk", ".electrodes.txt")
    for path in (args.mesh, elec):
        if not os.path.exists(path):
            raise ParameterError(f"missing input file: {path}")
    mesh = read_mesh(args.mesh, elec)
    proto = radial_protocol() if args.protocol == "radial" else full_protocol()
    frame = FemSystem(mesh, args.sigma).frame(proto, args.current)
    if args.snr_db is not None:
        from .noise import add_noise
        frame = add_noise(frame, NoiseModel(snr_db=args.snr_db, seed=args.seed))
    path = os.path.join(out, "frames.csv")
    write_frames_csv(path, [frame])
    print(f"wrote {path}")
    return 0


def _cmd_sweep_spacing(args) -> int:
    out = _out_dir(args)
    l_values = [float(v) for v in args.l.split(",") if v.strip()]
    cases = sweep_spacing(l_values, target_size=args.resolution, jobs=args.jobs)
    save_spacing_csv(cases, os.path.join(out, "spacing.csv"))
    print(f"wrote {out}/spacing.csv")
    return 0 if all(c.ok for c in cases) else 1


def _cmd_sweep_detect(args) -> int:
    out = _out_dir(args)
    d_grid = np.arange(args.d_min, args.d_max + 1e-9, args.d_step)
    f_grid = np.round(np.arange(args.f_min, 1.0 + 1e-9, args.f_step), 10)
    noise = NoiseModel(snr_db=args.snr_db, seed=args.seed)
    result = sweep_detectability(d_grid=d_grid, f_grid=f_grid, noise=noise,
                                 target_size=args.resolution, jobs=args.jobs)
    for p in save_detectability_csv(result, out):
        print(f"wrote {p}")
    return 0 if not result.failures else 1


def _cmd_reconstruct(args) -> int:
    out = _out_dir(args)
    if args.mode != "absolute" and not args.reference:
        raise ParameterError("difference modes need --reference")
    frames = read_frames_csv(args.frames)
    frame = frames[args.frame_index]
    rm = build_recon_mesh(protocol=frame.protocol)
    if args.mode == "absolute":
        recon = reconstruct_absolute(frame, rm, lam=args.lam if args.lam else 0.01)
    else:
        reference = read_frames_csv(args.reference)[0]
        if args.mode == "ptd":
            reference.meta["simulated_reference"] = True
        recon = reconstruct_difference(frame, reference, rm, lam=args.lam,
                                       mode=args.mode.upper())
    stem = os.path.join(out, f"recon_{args.mode}")
    write_vtk(stem + ".vtk", rm.mesh, cell_fields={"value": recon.values},
              title=f"{recon.mode} reconstruction")
    with open(stem + ".csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "value"])
        for e, v in enumerate(recon.values):
            w.writerow([e, f"{v:.12e}"])
    print(f"wrote {stem}.vtk and {stem}.csv (lambda={recon.lam:g}, "
          f"iterations={recon.iterations})")
    return 0


def _cmd_experiment(args) -> int:
    from .experiments import parse_config, run_experiment

    cfg = parse_config(args.config, out_dir_override=args.out,
                       seed_override=args.seed if args.seed != 0 else None)
    paths = run_experiment(cfg)
    print(f"scenario {cfg.scenario}: {len(paths)} artifacts under {cfg.out_dir}")
    return 0


_COMMANDS = {
    "mesh": _cmd_mesh,
    "forward": _cmd_forward,
    "sweep-spacing": _cmd_sweep_spacing,
    "sweep-detect": _cmd_sweep_detect,
    "reconstruct": _cmd_reconstruct,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BalloonEitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
