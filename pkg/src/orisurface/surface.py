"""Grid layout, manipulation-mode group assignment, contact-ratio activation
and the per-tick surface controller.

Index convention: module (i, j) sits at (j*spacing, i*spacing). The grid
examples in the rotation figure are indexed with row 0 at the figure top;
with row 0 at y=0 this makes the "cw" plan's yaw positive about world +Z.
The controller is stateless: activation uses each module's nominal (rest
orientation) footprint and the object pose at the start of the tick, so the
output depends only on (quantized t, object footprint, plan, params).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cpg import CpgParams, Direction, TWO_PI
from .kinematics import CanfieldGeometry
from .polygons import DegeneratePolygonError, intersection_area, polygon_area, square


class GridTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class ModuleGrid:
    rows: int = 5
    cols: int = 5
    spacing: float = 0.120

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.spacing <= 0.0:
            raise ValueError("grid needs positive rows, cols and spacing")

    @property
    def n_modules(self):
        return self.rows * self.cols

    def origins(self):
        """(n, 2) module centers, row-major: origin(i, j) = (j*s, i*s)."""
        i, j = np.divmod(np.arange(self.n_modules), self.cols)
        return np.stack([j * self.spacing, i * self.spacing], axis=1).astype(float)

    @property
    def center(self):
        return np.array([(self.cols - 1) * self.spacing * 0.5,
                         (self.rows - 1) * self.spacing * 0.5])


@dataclass(frozen=True)
class ManipulationMode:
    """kind 'translate' with an axis/sign, or 'rotate' with a sense."""

    kind: str
    axis: str = "y"
    sign: int = 1
    sense: str = "cw"
    profile: str = "fast"

    def __post_init__(self):
        if self.kind not in ("translate", "rotate"):
            raise ValueError("kind must be 'translate' or 'rotate'")
        if self.axis not in ("x", "y"):
            raise ValueError("axis must be 'x' or 'y'")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        if self.sense not in ("cw", "ccw"):
            raise ValueError("sense must be 'cw' or 'ccw'")
        if self.profile not in ("fast", "smooth", "rotation"):
            raise ValueError("profile must be 'fast', 'smooth' or 'rotation'")

    @property
    def label(self):
        if self.kind == "rotate":
            return f"rotate:{self.sense}"
        return f"{self.kind}:{'+' if self.sign > 0 else '-'}{self.axis}:{self.profile}"


def parse_mode(text) -> ManipulationMode:
    """Accepts 'translate:+y:fast', 'fast:+y', 'smooth:-x', 'rotate:cw'."""
    parts = [p.strip().lower() for p in str(text).split(":") if p.strip()]
    if not parts:
        raise ValueError("empty mode string")
    if parts[0] in ("rotate", "rotation"):
        sense = parts[1] if len(parts) > 1 else "cw"
        return ManipulationMode(kind="rotate", sense=sense, profile="rotation")
    profile = "fast"
    axis_token = None
    for p in parts:
        if p in ("fast", "smooth"):
            profile = p
        elif p == "translate":
            continue
        else:
            axis_token = p
    if axis_token is None:
        raise ValueError(f"mode '{text}' does not name an axis like '+y'")
    sign = -1 if axis_token.startswith("-") else 1
    axis = axis_token.lstrip("+-")
    return ManipulationMode(kind="translate", axis=axis, sign=sign, profile=profile)


# command azimuths: delta=0 pushes along Y, delta=pi/2 along X
AXIS_DELTA = {"y": 0.0, "x": math.pi / 2.0}


@dataclass(frozen=True)
class SurfacePlan:
    """Grid plus per-module group id (1/2), command azimuth, push sign and
    a rest mask for modules held out of the plan."""

    grid: ModuleGrid
    mode: ManipulationMode
    group: np.ndarray
    delta_cmd: np.ndarray
    sign: np.ndarray
    rest: np.ndarray

    def group_phase(self, params: CpgParams):
        """Per-module oscillator phase: group 1 -> 0, group 2 -> phi."""
        return np.where(self.group == 1, 0.0, params.phi)

    def direction(self, index):
        return Direction(float(self.delta_cmd[index]), int(self.sign[index]))


def assign_translation(grid: ModuleGrid, axis, sign) -> SurfacePlan:
    """Diagonal checkerboard groups; every module shares the axis/sign."""
    mode = ManipulationMode(kind="translate", axis=axis, sign=1 if sign > 0 else -1)
    i, j = np.divmod(np.arange(grid.n_modules), grid.cols)
    group = np.where((i + j) % 2 == 0, 1, 2)
    delta_cmd = np.full(grid.n_modules, AXIS_DELTA[mode.axis])
    signs = np.full(grid.n_modules, mode.sign, dtype=int)
    rest = np.zeros(grid.n_modules, dtype=bool)
    return SurfacePlan(grid=grid, mode=mode, group=group, delta_cmd=delta_cmd,
                       sign=signs, rest=rest)


def assign_rotation(grid: ModuleGrid, sense) -> SurfacePlan:
    """Quadrant layout: group 1 pushes along X (+ in the (0,0) quadrant,
    - in the opposite one), group 2 along Y. Boundary modules join the
    nearest quadrant with ties to group 1; a module exactly at the grid
    center rests. 'ccw' flips every sign."""
    if grid.rows < 2 or grid.cols < 2:
        raise GridTooSmallError("rotation needs at least a 2x2 grid")
    mode = ManipulationMode(kind="rotate", sense=sense, profile="rotation")
    rel = grid.origins() - grid.center
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    ang = np.where(ang >= math.pi - 1e-12, -math.pi, ang)
    at_center = np.hypot(rel[:, 0], rel[:, 1]) < 1e-12

    group = np.zeros(grid.n_modules, dtype=int)
    delta_cmd = np.zeros(grid.n_modules)
    signs = np.zeros(grid.n_modules, dtype=int)

    q_bl = (ang >= -math.pi - 1e-12) & (ang <= -math.pi / 2.0 + 1e-12)
    q_tr = (ang >= -1e-12) & (ang <= math.pi / 2.0 + 1e-12)
    q_br = ~q_bl & ~q_tr & (ang < 0.0)
    q_tl = ~q_bl & ~q_tr & (ang > 0.0)

    group[q_bl | q_tr] = 1
    group[q_br | q_tl] = 2
    delta_cmd[q_bl | q_tr] = AXIS_DELTA["x"]
    delta_cmd[q_br | q_tl] = AXIS_DELTA["y"]
    signs[q_bl] = 1
    signs[q_tr] = -1
    signs[q_br] = -1
    signs[q_tl] = 1
    if mode.sense == "ccw":
        signs = -signs
    group[at_center] = 1
    signs[at_center] = 1
    return SurfacePlan(grid=grid, mode=mode, group=group, delta_cmd=delta_cmd,
                       sign=signs, rest=at_center)


def build_plan(grid: ModuleGrid, mode: ManipulationMode) -> SurfacePlan:
    if mode.kind == "rotate":
        plan = assign_rotation(grid, mode.sense)
    else:
        plan = assign_translation(grid, mode.axis, mode.sign)
    return SurfacePlan(grid=grid, mode=mode, group=plan.group, delta_cmd=plan.delta_cmd,
                       sign=plan.sign, rest=plan.rest)


def contact_ratio(plate_polygon, object_footprint):
    """area(intersection) / area(plate polygon); polygons may be (n,2) or
    (n,3) (the Z column is ignored)."""
    plate = np.asarray(plate_polygon, float)[:, :2]
    footprint = np.asarray(object_footprint, float)
    if len(footprint) and footprint.ndim == 2 and footprint.shape[1] > 2:
        footprint = footprint[:, :2]
    plate_area = abs(polygon_area(plate))
    if plate_area <= 0.0:
        raise DegeneratePolygonError("plate polygon has zero area")
    if len(footprint) < 3:
        return 0.0
    return intersection_area(footprint, plate) / plate_area


def contact_ratios(footprint, grid: ModuleGrid, geom: CanfieldGeometry):
    """Contact ratio of the object footprint against every module's nominal
    footprint (rest-orientation plate square)."""
    ratios = np.zeros(grid.n_modules)
    if footprint is None or len(footprint) < 3:
        return ratios
    fp = np.asarray(footprint, float)
    fx_min, fy_min = fp.min(axis=0)
    fx_max, fy_max = fp.max(axis=0)
    half = 0.5 * geom.plate_side
    plate_area = geom.plate_side ** 2
    for k, (ox, oy) in enumerate(grid.origins()):
        if ox + half < fx_min or ox - half > fx_max or oy + half < fy_min or oy - half > fy_max:
            continue
        ratios[k] = intersection_area(fp, square(ox, oy, geom.plate_side)) / plate_area
    return ratios


def controller_step(t, footprint, plan: SurfacePlan, params: CpgParams,
                    geom: CanfieldGeometry = CanfieldGeometry(),
                    controller_period=0.05):
    """One controller tick.

    Returns (commands, active): commands is an (n, 3) array of
    (delta, psi, height) per module, active the activation mask. Modules
    whose contact ratio is below epsilon (or held out by the plan) command
    the rest pose (delta=0, psi0, h0). t is quantized to the controller
    clock, making the output replayable from (t, footprint, plan, params).
    """
    tick = math.floor(t / controller_period + 1e-9)
    t_q = tick * controller_period

    n = plan.grid.n_modules
    ratios = contact_ratios(footprint, plan.grid, geom)
    active = (ratios >= params.epsilon) & ~plan.rest

    commands = np.empty((n, 3))
    commands[:, 0] = 0.0
    commands[:, 1] = params.psi0
    commands[:, 2] = params.h0
    if active.any():
        phase = plan.group_phase(params)[active]
        sigma = np.where(plan.sign[active] > 0, params.sigma,
                         (params.sigma + math.pi) % TWO_PI)
        arg = TWO_PI * params.freq * t_q + phase
        commands[active, 0] = plan.delta_cmd[active]
        commands[active, 1] = params.psi_amp * np.sin(arg + sigma) + params.psi0
        commands[active, 2] = params.h_amp * np.sin(arg) + params.h0
    return commands, active
