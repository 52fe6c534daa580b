"""Robustness sweep campaigns: object mass x width grid and friction series.

Sweep outputs are resumable: each cell's identity is a hash of its canonical
cell config, completed hashes are skipped on rerun, and rows append. Cells
that fail (infeasible parameters, aborted episodes) are recorded as penalty
rows so a sweep always completes.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor

from .config import ExperimentConfig, cell_hash
from .dynamics import ObjectSpec
from .optimizer import PENALTY_COST, evaluate, mode_presets
from .surface import parse_mode

MASSES_KG = tuple(round(0.05 + 0.15 * k, 2) for k in range(7))      # 0.05..0.95
WIDTH_SPANS = tuple(round(1.25 * (k + 1), 2) for k in range(7))     # 1.25..8.75
SWEEP_OBJECT_HEIGHT = 0.05
FRICTION_VALUES = tuple(round(0.02 * (k + 1), 2) for k in range(50))  # 0.02..1.00
FRICTION_BAND = (0.3, 0.9)

MASS_WIDTH_COLUMNS = ("cell", "mass_kg", "width_spans", "mode", "direction",
                      "v_mps", "J", "status")
FRICTION_COLUMNS = ("cell", "mu_slide", "mode", "direction", "v_mps", "J",
                    "band_stable", "status")


def _direction_label(mode):
    if mode.kind == "rotate":
        return mode.sense
    return ("+" if mode.sign > 0 else "-") + mode.axis


def _existing_cells(path):
    if not os.path.exists(path):
        return set()
    done = set()
    with open(path) as fh:
        header = fh.readline()
        for line in fh:
            cell = line.split(",", 1)[0].strip()
            if cell:
                done.add(cell)
    return done


def _fmt_row(values):
    out = []
    for v in values:
        if isinstance(v, float):
            out.append(f"{v:.9g}")
        else:
            out.append(str(v))
    return ",".join(out) + "\n"


def _run_cell(cell):
    """Evaluate one sweep cell; returns (v, J, status). Module-level so a
    process pool can run cells concurrently."""
    params, mode, obj_spec, sim, grid, geom, contact = cell
    weights, _ = mode_presets(mode)
    metrics, j = evaluate(params, mode, obj_spec, sim, grid=grid, geom=geom,
                          contact=contact, weights=weights)
    if metrics is None:
        return float("nan"), PENALTY_COST, "penalty"
    return metrics.v, j, "ok"


def _run_cells(cells, jobs):
    if jobs <= 1:
        return [_run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell, cells, chunksize=1))


def _write_rows(path, columns, rows):
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        if new_file:
            fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(_fmt_row(row))


def run_sweep_mass_width(config: ExperimentConfig, out_path, modes=None, jobs=1):
    """7 masses x 7 widths grid of box objects (fixed 50 mm height) per mode.

    Widths are multiples of the module spacing; the CPG parameters come from
    the config. Returns the number of newly computed cells."""
    params = config.resolve_params()
    modes = [parse_mode(m) if isinstance(m, str) else m for m in (modes or [config.mode])]
    done = _existing_cells(out_path)
    todo = []
    meta = []
    for mode in modes:
        for mass in MASSES_KG:
            for spans in WIDTH_SPANS:
                width = spans * config.grid.spacing
                obj_spec = ObjectSpec(size=(width, width, SWEEP_OBJECT_HEIGHT),
                                      mass=mass)
                ident = cell_hash({
                    "sweep": "mass_width", "mode": mode.label, "mass": mass,
                    "spans": spans, "cpg": params.as_dict(),
                    "sim": dataclasses.asdict(config.sim),
                    "contact": dataclasses.asdict(config.contact),
                })
                if ident in done:
                    continue
                todo.append((params, mode, obj_spec, config.sim, config.grid,
                             config.geom, config.contact))
                meta.append((ident, mass, spans, mode))
    results = _run_cells(todo, jobs)
    rows = [(ident, mass, spans, mode.label, _direction_label(mode), v, j, status)
            for (ident, mass, spans, mode), (v, j, status) in zip(meta, results)]
    _write_rows(out_path, MASS_WIDTH_COLUMNS, rows)
    return len(rows)


def run_sweep_friction(config: ExperimentConfig, out_path, modes=None, jobs=1):
    """Sliding-friction series 0.02..1.00 in 0.02 steps on the config object.

    The band_stable column flags the 0.3-0.9 plateau region for plotting.
    Returns the number of newly computed cells."""
    params = config.resolve_params()
    modes = [parse_mode(m) if isinstance(m, str) else m for m in (modes or [config.mode])]
    done = _existing_cells(out_path)
    todo = []
    meta = []
    for mode in modes:
        for mu in FRICTION_VALUES:
            contact = dataclasses.replace(config.contact, mu_slide=mu,
                                          mu_roll=min(config.contact.mu_roll, mu))
            ident = cell_hash({
                "sweep": "friction", "mode": mode.label, "mu": mu,
                "object": config.obj_spec.as_dict(), "cpg": params.as_dict(),
                "sim": dataclasses.asdict(config.sim),
                "contact": dataclasses.asdict(contact),
            })
            if ident in done:
                continue
            todo.append((params, mode, config.obj_spec, config.sim, config.grid,
                         config.geom, contact))
            meta.append((ident, mu, mode))
    results = _run_cells(todo, jobs)
    rows = []
    for (ident, mu, mode), (v, j, status) in zip(meta, results):
        in_band = int(FRICTION_BAND[0] - 1e-9 <= mu <= FRICTION_BAND[1] + 1e-9)
        rows.append((ident, mu, mode.label, _direction_label(mode), v, j,
                     in_band, status))
    _write_rows(out_path, FRICTION_COLUMNS, rows)
    return len(rows)


def read_sweep_csv(path):
    """Rows of a sweep CSV as dicts with numeric fields parsed."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != len(header):
                continue
            row = dict(zip(header, parts))
            for key in row:
                if key in ("cell", "mode", "direction", "status"):
                    continue
                try:
                    row[key] = float(row[key])
                except ValueError:
                    row[key] = float("nan")
            rows.append(row)
    return rows
