"""Command-line entry point.

Subcommands: ik, workspace, cpg-trace, simulate, metrics, optimize,
sweep-mass-width, sweep-friction.

Exit codes:
  0 success
  2 configuration / argument error
  3 simulation or computation failure (infeasible pose, aborted episode)

ORI_SEED overrides the seed from configs and --seed flags. All CSV output
uses 9 significant digits; column layouts are documented in docs/formats.md.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, object_spec_from_string
from .cpg import CpgParams, trace
from .dynamics import (EnergyBlowupError, InvalidPlacementError,
                       ObjectLostError, SimConfig, TrajectoryLog,
                       simulate_episode)
from .kinematics import (CanfieldGeometry, InfeasiblePoseError, PlatePose,
                         inverse_kinematics, workspace_area)
from .metrics import compute_metrics, cost
from .optimizer import mode_presets, optimize
from .surface import parse_mode
from .sweeps import run_sweep_friction, run_sweep_mass_width

COARSE_DT = 2e-3


def _f9(x):
    return f"{x:.9g}"


def _env_seed(default):
    env = os.environ.get("ORI_SEED")
    if env is None:
        return default
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"ORI_SEED must be an integer: {exc}") from exc


def _apply_coarse(sim: SimConfig, coarse: bool) -> SimConfig:
    return dataclasses.replace(sim, dt=COARSE_DT) if coarse else sim


def cmd_ik(args):
    geom = CanfieldGeometry(link_length=args.link_length, joint_radius=args.joint_radius)
    pose = PlatePose(delta=args.delta, psi=args.psi, height=args.height)
    angles = inverse_kinematics(pose, geom)
    print(" ".join(_f9(t) for t in angles.theta))
    return 0


def cmd_workspace(args):
    geom = CanfieldGeometry()
    band = workspace_area(args.h_low, args.h_high, geom, resolution=args.resolution)
    lines = ["psi_x,psi_y,feasible\n"]
    for iy, ty in enumerate(band.axis):
        for ix, tx in enumerate(band.axis):
            lines.append(f"{_f9(tx)},{_f9(ty)},{int(band.mask[iy, ix])}\n")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.writelines(lines)
    else:
        sys.stdout.writelines(lines)
    print(f"feasible_area {_f9(band.feasible_area)}")
    return 0


def cmd_cpg_trace(args):
    params = CpgParams(h_amp=args.h_amp, psi_amp=args.psi_amp, freq=args.freq,
                       h0=args.h0, psi0=args.psi0, sigma=args.sigma,
                       phi=args.phi, epsilon=args.epsilon)
    t, h1, p1, h2, p2 = trace(params, duration=args.duration, rate=args.rate)
    lines = ["t,H_g1,psi_g1,H_g2,psi_g2\n"]
    for row in zip(t, h1, p1, h2, p2):
        lines.append(",".join(_f9(x) for x in row) + "\n")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.writelines(lines)
    else:
        sys.stdout.writelines(lines)
    return 0


def _write_sidecar(path, config: ExperimentConfig, log, metrics_dict):
    doc = {
        "config": config.normalized(),
        "stats": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v)
                  for k, v in log.stats.items()},
        "metrics": metrics_dict,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_grid(text):
    try:
        rows, cols = (int(p) for p in str(text).lower().split("x"))
        return rows, cols
    except ValueError as exc:
        raise ConfigError(f"--grid must look like 5x5: {exc}") from exc


def cmd_simulate(args):
    config = ExperimentConfig.load(args.config)
    if args.mode:
        config.mode = parse_mode(args.mode)
    if args.grid or args.spacing:
        rows, cols = _parse_grid(args.grid) if args.grid else (config.grid.rows,
                                                               config.grid.cols)
        spacing = args.spacing if args.spacing else config.grid.spacing
        from .surface import ModuleGrid
        config.grid = ModuleGrid(rows=rows, cols=cols, spacing=spacing)
    sim = _apply_coarse(config.sim, args.coarse)
    params = config.resolve_params()
    log = simulate_episode(sim, config.mode, params, config.obj_spec,
                           grid=config.grid, geom=config.geom,
                           contact=config.contact)
    m = compute_metrics(log)
    weights, _ = mode_presets(config.mode)
    metrics_doc = {**m.as_dict(), "J": cost(m, weights)}

    out = dict(config.output)
    traj_path = args.trajectory or out.get("trajectory", "trajectory.csv")
    metrics_path = args.metrics_out or out.get("metrics", "metrics.json")
    sidecar_path = args.sidecar or out.get("sidecar", "sidecar.json")
    log.to_csv(traj_path)
    with open(metrics_path, "w") as fh:
        json.dump(metrics_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    cfg_echo = dataclasses.replace(config, sim=sim)
    _write_sidecar(sidecar_path, cfg_echo, log, metrics_doc)
    print(f"trajectory {traj_path}")
    print(f"metrics {metrics_path}")
    print(f"sidecar {sidecar_path}")
    return 0


def cmd_metrics(args):
    log = TrajectoryLog.from_csv(args.trajectory)
    m = compute_metrics(log)
    text = json.dumps(m.as_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_optimize(args):
    mode = parse_mode(args.mode)
    obj_spec = object_spec_from_string(args.object)
    seed = _env_seed(args.seed)
    sim = _apply_coarse(SimConfig(seed=seed), args.coarse)
    weights, space = mode_presets(mode)
    campaign = optimize(space, mode, obj_spec, budget=args.budget, seed=seed,
                        kind=args.kind, cfg=sim, weights=weights, jobs=args.jobs)
    campaign.to_json(args.out)
    best = campaign.best
    print(f"campaign {args.out}")
    print(f"best_J {_f9(best['J'])} at evaluation {campaign.best_index + 1} of {len(campaign.history)}")
    return 0


def _cmd_sweep(args, runner):
    config = ExperimentConfig.load(args.config)
    config.sim = _apply_coarse(config.sim, args.coarse)
    modes = [m.strip() for m in args.modes.split(",")] if args.modes else None
    n = runner(config, args.out, modes=modes, jobs=args.jobs)
    print(f"wrote {n} new cells to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="orisurface", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ik", help="joint angles for one plate pose")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--psi", type=float, required=True)
    p.add_argument("--height", type=float, required=True)
    p.add_argument("--link-length", type=float, default=0.030)
    p.add_argument("--joint-radius", type=float, default=0.02021)
    p.set_defaults(fn=cmd_ik)

    p = sub.add_parser("workspace", help="tilt-disk feasibility raster for a height band")
    p.add_argument("--h-low", type=float, required=True)
    p.add_argument("--h-high", type=float, required=True)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_workspace)

    p = sub.add_parser("cpg-trace", help="two-group oscillator trace CSV")
    p.add_argument("--h-amp", type=float, required=True)
    p.add_argument("--psi-amp", type=float, required=True)
    p.add_argument("--freq", type=float, required=True)
    p.add_argument("--h0", type=float, required=True)
    p.add_argument("--psi0", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--rate", type=float, default=20.0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_cpg_trace)

    p = sub.add_parser("simulate", help="run one episode from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--coarse", action="store_true", help="run at dt=2e-3")
    p.add_argument("--mode", help="override the config mode, e.g. translate:+y:fast")
    p.add_argument("--grid", help="override the grid, e.g. 5x5")
    p.add_argument("--spacing", type=float, help="override the module spacing")
    p.add_argument("--trajectory")
    p.add_argument("--metrics-out")
    p.add_argument("--sidecar")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("metrics", help="metrics JSON from a trajectory CSV")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("optimize", help="run an optimization campaign")
    p.add_argument("--mode", required=True, help="e.g. fast:+y, smooth:-x, rotate:cw")
    p.add_argument("--object", required=True, help="box:0.3x0.3x0.01:0.254")
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=("evolutionary", "random"), default="evolutionary")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--coarse", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_optimize)

    p = sub.add_parser("sweep-mass-width", help="object mass x width robustness grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--modes", help="comma-separated mode labels")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--coarse", action="store_true")
    p.set_defaults(fn=lambda a: _cmd_sweep(a, run_sweep_mass_width))

    p = sub.add_parser("sweep-friction", help="sliding-friction robustness series")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--modes", help="comma-separated mode labels")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--coarse", action="store_true")
    p.set_defaults(fn=lambda a: _cmd_sweep(a, run_sweep_friction))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (InfeasiblePoseError, EnergyBlowupError, InvalidPlacementError,
            ObjectLostError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
