"""Deterministic rigid-body episode simulator.

Plates are kinematically tracked bodies: a critically-damped second-order law
(bandwidth tracking_bandwidth) drives each plate's tilt components and height
toward the commanded pose, standing in for the articulated linkage with servo
position control. The manipulated object is a rigid box under gravity,
penalty contacts against the plate surfaces, regularized Coulomb sliding
friction plus rolling and torsional resistance, integrated with semi-implicit
Euler (velocities first, then positions) at a fixed timestep.

Forces are impulse-limited for unconditional stability: per-contact stiffness
and damping are capped so the total normal-force stiffness cannot exceed the
explicit-integration limit for the current contact count, and friction forces
cannot reverse the relative velocity within one step. The caps are inactive
in ordinary configurations (see TrajectoryLog.stats['stiffness_clamped']).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cpg import CpgParams
from .kinematics import CanfieldGeometry, PlatePose, solve_joint_angles
from .polygons import box_footprint
from .surface import (ManipulationMode, ModuleGrid, SurfacePlan, build_plan,
                      contact_ratios, controller_step)


class EnergyBlowupError(RuntimeError):
    """Kinetic energy exceeded 10x the running episode baseline; signals an
    unstable stiffness/timestep combination."""

    def __init__(self, time, kinetic_energy):
        self.time = float(time)
        self.kinetic_energy = float(kinetic_energy)
        super().__init__(
            f"kinetic energy blew up at t={time:.4f}s (KE={kinetic_energy:.3e} J)")


class ObjectLostError(RuntimeError):
    """The object left the surface-manipulation envelope (ballistic flight or
    past the grid margin). Such episodes are outside the contact model's
    validity domain; the optimizer treats them as failed evaluations."""

    def __init__(self, time, reason):
        self.time = float(time)
        self.reason = reason
        super().__init__(f"object left the manipulation envelope at "
                         f"t={time:.2f}s ({reason})")


# episode validity envelope: abort when the object flies free of all plates
# for this long, rises this far above its settled ride height beyond the
# commanded lift amplitude, or strays this many grid pitches past the plates
FLIGHT_TIMEOUT = 0.25
Z_ENVELOPE = 0.08
XY_MARGIN_SPACINGS = 1.5


class InvalidPlacementError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectSpec:
    """Rigid box to manipulate: full side lengths (m) and mass (kg)."""

    size: tuple
    mass: float
    shape: str = "box"

    def __post_init__(self):
        if self.shape != "box":
            raise ValueError("only box objects are supported")
        if len(self.size) != 3 or any(s <= 0.0 for s in self.size):
            raise ValueError("size must be three positive lengths")
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")

    def as_dict(self):
        return {"shape": self.shape, "size": [float(s) for s in self.size],
                "mass": float(self.mass)}


@dataclass
class RigidObject:
    half_extents: np.ndarray
    mass: float
    inertia_body: np.ndarray  # principal moments, body frame
    position: np.ndarray
    quat: np.ndarray          # (w, x, y, z), unit
    velocity: np.ndarray
    omega: np.ndarray

    @staticmethod
    def box(spec: ObjectSpec, position=(0.0, 0.0, 0.0)):
        sx, sy, sz = spec.size
        m = spec.mass
        inertia = np.array([
            m / 12.0 * (sy * sy + sz * sz),
            m / 12.0 * (sx * sx + sz * sz),
            m / 12.0 * (sx * sx + sy * sy),
        ])
        return RigidObject(
            half_extents=np.array(spec.size, float) * 0.5,
            mass=float(m),
            inertia_body=inertia,
            position=np.array(position, float),
            quat=np.array([1.0, 0.0, 0.0, 0.0]),
            velocity=np.zeros(3),
            omega=np.zeros(3),
        )

    def rotation(self):
        return quat_to_matrix(self.quat)

    def footprint(self):
        return box_footprint(self.position, self.rotation(), self.half_extents)

    def kinetic_energy(self):
        r = self.rotation()
        iw = r @ np.diag(self.inertia_body) @ r.T
        return 0.5 * self.mass * float(self.velocity @ self.velocity) \
            + 0.5 * float(self.omega @ iw @ self.omega)


@dataclass(frozen=True)
class ContactParams:
    """Penalty contact constants. mu_slide/mu_roll are the calibrated 0.5 and
    0.01; the torsional coefficient has no published value and defaults to
    half the rolling one. v_eps/omega_eps regularize the Coulomb laws;
    contact_radius is the moment arm of the rolling/torsional resistance."""

    mu_slide: float = 0.5
    mu_roll: float = 0.01
    mu_torsion: float = 0.005
    k_n: float = 5000.0
    c_n: float = 50.0
    v_eps: float = 1e-3
    omega_eps: float = 1e-2
    contact_radius: float = 0.019

    def __post_init__(self):
        for name in ("mu_slide", "mu_roll", "mu_torsion", "k_n", "c_n",
                     "v_eps", "omega_eps", "contact_radius"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.mu_slide < self.mu_roll:
            raise ValueError("mu_slide must be >= mu_roll")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 5e-4
    duration: float = 5.0
    controller_period: float = 0.05
    gravity: float = 9.81
    max_iterations: int = 30
    seed: int = 0
    settle_time: float = 0.5
    tracking_bandwidth: float = 12.0
    placement_jitter: float = 0.002

    def __post_init__(self):
        if self.dt <= 0.0 or self.duration <= 0.0:
            raise ValueError("dt and duration must be positive")
        ratio = self.controller_period / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt must divide controller_period")

    @property
    def steps_per_tick(self):
        return int(round(self.controller_period / self.dt))

    @property
    def n_ticks(self):
        return int(round(self.duration / self.controller_period))

    def coarse(self):
        """The --coarse profile: 4x larger timestep, same schedule."""
        return replace(self, dt=2e-3)


# ---------------------------------------------------------------------------
# quaternion / rotation helpers (w, x, y, z convention)

def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_integrate(q, omega_world, dt):
    w, x, y, z = q
    ox, oy, oz = omega_world
    dq = 0.5 * np.array([
        -ox * x - oy * y - oz * z,
        ox * w + oy * z - oz * y,
        -ox * z + oy * w + oz * x,
        ox * y - oy * x + oz * w,
    ])
    q = q + dt * dq
    return q / np.linalg.norm(q)


def euler_zyx(q):
    """(roll, pitch, yaw) for R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    w, x, y, z = q
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    pitch = math.asin(max(-1.0, min(1.0, 2.0 * (w * y - z * x))))
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw


def _plate_rotations(tx, ty):
    """Tilt rotation matrices (m, 3, 3) for rotation vectors (ty, -tx, 0);
    same math as kinematics.tilt_matrix, written out for the hot loop."""
    a = ty
    b = -tx
    psi2 = a * a + b * b
    psi = np.sqrt(psi2)
    small = psi < 1e-8
    denom = np.where(small, 1.0, psi)
    s = np.where(small, 1.0 - psi2 / 6.0, np.sin(psi) / denom)
    c2 = np.where(small, 0.5 - psi2 / 24.0, (1.0 - np.cos(psi)) / np.where(small, 1.0, psi2))
    rot = np.empty(a.shape + (3, 3))
    rot[..., 0, 0] = 1.0 - c2 * b * b
    rot[..., 0, 1] = c2 * a * b
    rot[..., 0, 2] = s * b
    rot[..., 1, 0] = c2 * a * b
    rot[..., 1, 1] = 1.0 - c2 * a * a
    rot[..., 1, 2] = -s * a
    rot[..., 2, 0] = -s * b
    rot[..., 2, 1] = s * a
    rot[..., 2, 2] = 1.0 - c2 * psi2
    return rot


def _plate_omega(tx, ty, dtx, dty):
    """Angular velocity (m, 3) of plates with rotation vector r = (ty, -tx, 0)
    and rate rdot = (dty, -dtx, 0): omega = J_l(r) rdot. For horizontal r the
    cross products collapse to z / in-plane components."""
    a = ty
    b = -tx
    c = dty
    d = -dtx
    psi2 = a * a + b * b
    psi = np.sqrt(psi2)
    small = psi < 1e-8
    c1 = np.where(small, 0.5 - psi2 / 24.0,
                  (1.0 - np.cos(psi)) / np.where(small, 1.0, psi2))
    c2 = np.where(small, 1.0 / 6.0 - psi2 / 120.0,
                  (psi - np.sin(psi)) / np.where(small, 1.0, psi2 * psi))
    e = a * d - b * c  # z component of r x rdot
    omega = np.empty(a.shape + (3,))
    omega[..., 0] = c + c2 * b * e
    omega[..., 1] = d - c2 * a * e
    omega[..., 2] = c1 * e
    return omega


def _cross(a, b):
    """Component cross product for (..., 3) arrays (avoids np.cross overhead)."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


# ---------------------------------------------------------------------------
# plate bank

_ENVELOPE_CACHE = {}


def _feasibility_envelope(geom: CanfieldGeometry, n_h=64, n_delta=72, n_psi=200,
                          margin=0.02):
    """Conservative radial workspace envelope: psi_safe(H) such that every
    pose with psi <= psi_safe(interp at H) is IK-feasible. Poses outside the
    envelope fall back to the exact feasibility check."""
    key = (geom.link_length, geom.joint_radius, geom.leg_azimuths,
           geom.theta_min, geom.theta_max)
    hit = _ENVELOPE_CACHE.get(key)
    if hit is not None:
        return hit
    h_grid = np.linspace(1e-3, geom.max_height, n_h)
    delta = np.linspace(0.0, 2.0 * math.pi, n_delta, endpoint=False)
    psi = np.linspace(0.0, math.pi / 2.0 - 1e-6, n_psi)
    tx = psi[None, :, None] * np.sin(delta)[None, None, :]
    ty = psi[None, :, None] * np.cos(delta)[None, None, :]
    h = h_grid[:, None, None]
    _, ok = solve_joint_angles(tx, ty, h, geom)
    # first infeasible psi index per (H, delta); min over delta, minus margin
    first_bad = np.where(ok.all(axis=1), n_psi, np.argmin(ok, axis=1))
    safe_idx = np.maximum(first_bad.min(axis=1) - 1, 0)
    psi_safe = np.maximum(psi[safe_idx] - margin, 0.0)
    result = (h_grid, psi_safe)
    _ENVELOPE_CACHE[key] = result
    return result


class PlateBank:
    """Vectorized tracked state of all plates: world tilt components (u = tilt
    toward +X, v = tilt toward +Y), height and their rates, plus the current
    command."""

    def __init__(self, grid: ModuleGrid, geom: CanfieldGeometry, params: CpgParams):
        n = grid.n_modules
        self.origins = grid.origins()
        self.geom = geom
        # rows: tilt-x, tilt-y, height; rest pose is delta=0, psi=psi0, h0
        self._x = np.zeros((3, n))
        self._dx = np.zeros((3, n))
        self._cmd = np.zeros((3, n))
        self._x[1] = params.psi0
        self._x[2] = params.h0
        self._cmd[:] = self._x
        self.u, self.v, self.h = self._x
        self.du, self.dv, self.dh = self._dx
        self.saturations = 0
        self.sample_offsets = _plate_sample_offsets(geom.plate_side)
        self._env_h, self._env_psi = _feasibility_envelope(geom)

    def set_commands(self, commands, max_iterations):
        """commands: (n, 3) of (delta, psi, height); clamped to feasibility."""
        delta, psi, h = commands[:, 0], commands[:, 1], commands[:, 2]
        u = psi * np.sin(delta)
        v = psi * np.cos(delta)
        h = np.clip(h, 1e-3, self.geom.max_height)
        u, v, clamped = self._project_feasible(u, v, h, max_iterations)
        self.saturations += int(clamped.sum())
        self._cmd[0] = u
        self._cmd[1] = v
        self._cmd[2] = h

    def _project_feasible(self, u, v, h, max_iterations):
        _, ok = solve_joint_angles(u, v, h, self.geom)
        bad = ~ok
        if bad.any():
            # shrink the tilt toward zero (bisection on the scale factor);
            # psi=0 is feasible for any clamped height
            lo = np.zeros(bad.sum())
            hi = np.ones(bad.sum())
            ub, vb, hb = u[bad], v[bad], h[bad]
            for _ in range(max_iterations):
                mid = 0.5 * (lo + hi)
                _, ok_mid = solve_joint_angles(ub * mid, vb * mid, hb, self.geom)
                lo = np.where(ok_mid, mid, lo)
                hi = np.where(ok_mid, hi, mid)
            u = u.copy()
            v = v.copy()
            u[bad] = ub * lo
            v[bad] = vb * lo
        return u, v, bad

    def track(self, dt, bandwidth, max_iterations):
        wb2 = bandwidth * bandwidth
        two_wb = 2.0 * bandwidth
        self._dx += dt * (wb2 * (self._cmd - self._x) - two_wb * self._dx)
        self._x += dt * self._dx
        # keep the actual pose feasible as well (rare: overshoot near the
        # workspace boundary); the cheap radial envelope check covers the
        # common case, exact IK plus projection handles the rest
        psi2 = self.u * self.u + self.v * self.v
        psi_safe = np.interp(self.h, self._env_h, self._env_psi)
        if (psi2 > psi_safe * psi_safe).any():
            self._repair(dt, max_iterations)
        elif self.h.min() < 1e-3 or self.h.max() > self.geom.max_height:
            self._repair(dt, max_iterations)

    def _repair(self, dt, max_iterations):
        h_clamped = np.clip(self.h, 1e-3, self.geom.max_height)
        u2, v2, bad = self._project_feasible(self.u, self.v, h_clamped, max_iterations)
        moved = bad | (h_clamped != self.h)
        if moved.any():
            self.du[moved] = (u2[moved] - (self.u[moved] - dt * self.du[moved])) / dt
            self.dv[moved] = (v2[moved] - (self.v[moved] - dt * self.dv[moved])) / dt
            self.dh[moved] = (h_clamped[moved] - (self.h[moved] - dt * self.dh[moved])) / dt
            self.u[moved] = u2[moved]
            self.v[moved] = v2[moved]
            self.h[moved] = h_clamped[moved]
            self.saturations += int(bad.sum())

    def poses(self):
        return [PlatePose.from_tilt(float(u), float(v), float(h))
                for u, v, h in zip(self.u, self.v, self.h)]


@dataclass
class PlateState:
    """Single-plate view used by the plate_track operation."""

    actual: PlatePose
    commanded: PlatePose
    rates: tuple = (0.0, 0.0, 0.0)  # (du, dv, dh) tilt/height rates


def plate_track(state: PlateState, command: PlatePose, dt,
                bandwidth=12.0) -> PlateState:
    """Critically-damped second-order tracking of one plate toward a command
    (same law the episode integrator applies to the whole bank)."""
    u, v = state.actual.tilt_xy
    cu, cv = command.tilt_xy
    du, dv, dh = state.rates
    h, ch = state.actual.height, command.height
    wb = bandwidth
    du += dt * (wb * wb * (cu - u) - 2.0 * wb * du)
    dv += dt * (wb * wb * (cv - v) - 2.0 * wb * dv)
    dh += dt * (wb * wb * (ch - h) - 2.0 * wb * dh)
    return PlateState(
        actual=PlatePose.from_tilt(u + dt * du, v + dt * dv, h + dt * dh),
        commanded=command,
        rates=(du, dv, dh),
    )


# ---------------------------------------------------------------------------
# contacts

_SAMPLE_FRACTIONS = np.array([-1.0, 0.0, 1.0])


def _plate_sample_offsets(plate_side):
    """3x3 grid of sample points on the plate square (corners, edge midpoints
    and center), in the plate frame."""
    half = 0.5 * plate_side
    gx, gy = np.meshgrid(_SAMPLE_FRACTIONS * half, _SAMPLE_FRACTIONS * half)
    return np.stack([gx.ravel(), gy.ravel(), np.zeros(9)], axis=1)


@dataclass
class ContactSet:
    """Struct-of-arrays contact bundle for one step."""

    points: np.ndarray      # (k, 3) world
    normals: np.ndarray     # (k, 3) plate normals
    depth: np.ndarray       # (k,) penetration along the object's support axis
    v_rel: np.ndarray       # (k, 3) object point velocity relative to plate
    omega_rel: np.ndarray   # (k, 3)
    plate_index: np.ndarray  # (k,)

    def __len__(self):
        return len(self.depth)


_EMPTY_CONTACTS = None


def _empty_contacts():
    global _EMPTY_CONTACTS
    if _EMPTY_CONTACTS is None:
        _EMPTY_CONTACTS = ContactSet(
            points=np.zeros((0, 3)), normals=np.zeros((0, 3)), depth=np.zeros(0),
            v_rel=np.zeros((0, 3)), omega_rel=np.zeros((0, 3)),
            plate_index=np.zeros(0, int))
    return _EMPTY_CONTACTS


def detect_contacts(obj: RigidObject, plates: PlateBank,
                    geom: CanfieldGeometry, rot_obj=None) -> ContactSet:
    """Sample-point contacts between the object's bottom face and the plate
    surfaces. Each plate contributes at most its 9 surface sample points;
    a point is in contact when it lies inside the object footprint and above
    the bottom-face plane by less than the box height."""
    p = obj.position
    he = obj.half_extents
    reach = math.sqrt(he[0] * he[0] + he[1] * he[1] + he[2] * he[2]) \
        + 0.71 * geom.plate_side + 0.01
    rel = plates.origins - p[:2]
    near = np.flatnonzero(rel[:, 0] ** 2 + rel[:, 1] ** 2 <= reach * reach)
    if len(near) == 0:
        return _empty_contacts()

    u = plates.u[near]
    v = plates.v[near]
    h = plates.h[near]
    rot = _plate_rotations(u, v)                 # (m, 3, 3)
    centers = np.empty((len(near), 3))
    centers[:, :2] = plates.origins[near]
    centers[:, 2] = h
    offsets = plates.sample_offsets              # (9, 3)
    pts = centers[:, None, :] + (rot @ offsets.T).transpose(0, 2, 1)

    r_obj = obj.rotation() if rot_obj is None else rot_obj
    local = (pts - p) @ r_obj                    # = R_obj^T (x - p)
    hx, hy, hz = he
    depth = local[..., 2] + hz
    inside = ((np.abs(local[..., 0]) <= hx) & (np.abs(local[..., 1]) <= hy)
              & (depth > 0.0) & (depth < 2.0 * hz))
    if not inside.any():
        return _empty_contacts()

    m_idx, k_idx = np.nonzero(inside)
    cpts = pts[m_idx, k_idx]
    centers_c = centers[m_idx]
    omega_p = _plate_omega(u, v, plates.du[near], plates.dv[near])[m_idx]
    dh_c = plates.dh[near][m_idx]

    arm_p = cpts - centers_c
    v_plate = _cross(omega_p, arm_p)
    v_plate[:, 2] += dh_c
    v_obj = obj.velocity + _cross(obj.omega[None, :], cpts - p)
    return ContactSet(
        points=cpts,
        normals=rot[m_idx, :, 2],
        depth=depth[m_idx, k_idx],
        v_rel=v_obj - v_plate,
        omega_rel=obj.omega[None, :] - omega_p,
        plate_index=near[m_idx],
    )


def contact_force(contacts: ContactSet, params: ContactParams, obj: RigidObject,
                  dt):
    """Wrench on the object from a contact set.

    Returns (force (3,), torque (3,), stats dict). Normal force is
    max(0, k*depth - c*v_n) along the plate normal with v_n the separating
    normal velocity; tangential force is regularized Coulomb; rolling and
    torsional resistances act on the relative angular velocity. Stiffness,
    damping and friction are impulse-limited (see module docstring)."""
    k = len(contacts)
    stats = {"n_contacts": k, "max_depth": 0.0, "cone_margin": 0.0,
             "stiffness_clamped": False, "total_normal": 0.0}
    if k == 0:
        return np.zeros(3), np.zeros(3), stats

    m = obj.mass
    k_eff = min(params.k_n, 0.25 * m / (k * dt * dt))
    c_eff = min(params.c_n, 0.5 * m / (k * dt))
    stats["stiffness_clamped"] = bool(k_eff < params.k_n)

    n = contacts.normals
    v_n = np.sum(contacts.v_rel * n, axis=1)
    normal_mag = np.maximum(0.0, k_eff * contacts.depth - c_eff * v_n)
    f_normal = normal_mag[:, None] * n

    v_t = contacts.v_rel - v_n[:, None] * n
    speed = np.sqrt(np.sum(v_t * v_t, axis=1))
    sat = np.minimum(1.0, speed / params.v_eps)
    stick_cap = (0.8 * m / (k * dt)) * speed
    f_t_mag = np.minimum(params.mu_slide * normal_mag * sat, stick_cap)
    scale = f_t_mag / np.maximum(speed, 1e-15)
    f_tangent = -scale[:, None] * v_t

    arm = contacts.points - obj.position
    force = f_normal + f_tangent
    torque = _cross(arm, force).sum(axis=0)

    # rolling / torsional resistance on relative angular velocity
    i_min = float(np.min(obj.inertia_body))
    w_n = np.sum(contacts.omega_rel * n, axis=1)
    w_t = contacts.omega_rel - w_n[:, None] * n
    w_t_mag = np.sqrt(np.sum(w_t * w_t, axis=1))
    roll_mag = np.minimum(
        params.mu_roll * normal_mag * params.contact_radius
        * np.minimum(1.0, w_t_mag / params.omega_eps),
        (0.8 * i_min / (k * dt)) * w_t_mag)
    w_scale = roll_mag / np.maximum(w_t_mag, 1e-15)
    torque = torque - (w_scale[:, None] * w_t).sum(axis=0)

    tors_mag = np.minimum(
        params.mu_torsion * normal_mag * params.contact_radius
        * np.minimum(1.0, np.abs(w_n) / params.omega_eps),
        (0.8 * i_min / (k * dt)) * np.abs(w_n))
    torque = torque - ((np.sign(w_n) * tors_mag)[:, None] * n).sum(axis=0)

    stats["max_depth"] = float(contacts.depth.max())
    stats["cone_margin"] = float(np.max(f_t_mag - params.mu_slide * normal_mag))
    stats["total_normal"] = float(normal_mag.sum())
    return force.sum(axis=0), torque, stats


# ---------------------------------------------------------------------------
# world stepping

@dataclass
class WorldState:
    obj: RigidObject
    plates: PlateBank
    geom: CanfieldGeometry
    contact: ContactParams
    cfg: SimConfig
    time: float = 0.0
    ke_floor: float = 0.0
    ke_max: float = 0.0
    last_contact: float = 0.0
    stats: dict = field(default_factory=lambda: {
        "max_depth": 0.0, "cone_margin": -np.inf, "stiffness_clamped": False,
        "contact_steps": 0, "contact_sum": 0, "max_normal": 0.0,
    })

    def __post_init__(self):
        if self.ke_floor == 0.0:
            self.ke_floor = 0.125 * self.obj.mass  # 1/2 m (0.5 m/s)^2


def step(world: WorldState, commands=None, cfg: SimConfig = None,
         params: ContactParams = None):
    """Advance the world one timestep. commands, when given, is the (n, 3)
    array of (delta, psi, height) plate commands to latch before stepping."""
    cfg = cfg or world.cfg
    contact_params = params or world.contact
    dt = cfg.dt
    obj = world.obj

    if commands is not None:
        world.plates.set_commands(np.asarray(commands, float), cfg.max_iterations)
    world.plates.track(dt, cfg.tracking_bandwidth, cfg.max_iterations)

    r = obj.rotation()
    contacts = detect_contacts(obj, world.plates, world.geom, rot_obj=r)
    force, torque, cstats = contact_force(contacts, contact_params, obj, dt)
    force[2] -= obj.mass * cfg.gravity

    r_scaled = r * obj.inertia_body  # R @ diag(I)
    inertia_w = r_scaled @ r.T
    l_w = inertia_w @ obj.omega
    torque = torque - _cross(obj.omega, l_w)
    inv_inertia = (r / obj.inertia_body) @ r.T

    obj.velocity = obj.velocity + (dt / obj.mass) * force
    obj.omega = obj.omega + dt * (inv_inertia @ torque)
    obj.position = obj.position + dt * obj.velocity
    obj.quat = quat_integrate(obj.quat, obj.omega, dt)
    world.time += dt

    s = world.stats
    if cstats["n_contacts"]:
        world.last_contact = world.time
        s["max_depth"] = max(s["max_depth"], cstats["max_depth"])
        s["cone_margin"] = max(s["cone_margin"], cstats["cone_margin"])
        s["stiffness_clamped"] = s["stiffness_clamped"] or cstats["stiffness_clamped"]
        s["contact_steps"] += 1
        s["contact_sum"] += cstats["n_contacts"]
        s["max_normal"] = max(s["max_normal"], cstats["total_normal"])

    ke = 0.5 * obj.mass * float(obj.velocity @ obj.velocity) \
        + 0.5 * float(obj.omega @ inertia_w @ obj.omega)
    baseline = world.ke_max if world.ke_max > world.ke_floor else world.ke_floor
    if ke > 10.0 * baseline:
        raise EnergyBlowupError(world.time, ke)
    if ke > world.ke_max:
        world.ke_max = ke
    return world


# ---------------------------------------------------------------------------
# episode driver

@dataclass
class TrajectoryLog:
    """Object trajectory sampled at the controller rate plus episode stats."""

    t: np.ndarray
    position: np.ndarray   # (n, 3)
    euler: np.ndarray      # (n, 3) roll, pitch, yaw (Z-Y-X convention)
    velocity: np.ndarray
    omega: np.ndarray
    stats: dict
    descriptor: dict

    CSV_COLUMNS = ("t", "x", "y", "z", "roll", "pitch", "yaw",
                   "vx", "vy", "vz", "wx", "wy", "wz")

    def __len__(self):
        return len(self.t)

    def rows(self):
        return np.concatenate(
            [self.t[:, None], self.position, self.euler, self.velocity, self.omega],
            axis=1)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for row in self.rows():
                fh.write(",".join(f"{x:.9g}" for x in row) + "\n")

    @staticmethod
    def from_csv(path):
        data = np.genfromtxt(path, delimiter=",", names=True)
        cols = TrajectoryLog.CSV_COLUMNS
        arr = np.stack([np.atleast_1d(data[c]) for c in cols], axis=1)
        return TrajectoryLog(t=arr[:, 0], position=arr[:, 1:4], euler=arr[:, 4:7],
                             velocity=arr[:, 7:10], omega=arr[:, 10:13],
                             stats={}, descriptor={})


def initial_position(mode: ManipulationMode, grid: ModuleGrid):
    """Start placement: rotation episodes at the grid center, translations
    centered over the edge-adjacent row/column on the trailing side."""
    cx, cy = grid.center
    s = grid.spacing
    if mode.kind == "rotate":
        return np.array([cx, cy])
    if mode.axis == "y":
        row = 1 if mode.sign > 0 else grid.rows - 2
        row = min(max(row, 0), grid.rows - 1)
        return np.array([cx, row * s])
    col = 1 if mode.sign > 0 else grid.cols - 2
    col = min(max(col, 0), grid.cols - 1)
    return np.array([col * s, cy])


def _rest_surface_height(params: CpgParams, geom: CanfieldGeometry):
    """Highest point of any rest-pose plate surface."""
    return params.h0 + 0.5 * geom.plate_side * abs(math.sin(params.psi0))


def simulate_episode(cfg: SimConfig, mode: ManipulationMode, params: CpgParams,
                     obj_spec: ObjectSpec,
                     grid: ModuleGrid = ModuleGrid(),
                     geom: CanfieldGeometry = CanfieldGeometry(),
                     contact: ContactParams = ContactParams(),
                     descriptor=None, plan: SurfacePlan = None) -> TrajectoryLog:
    """Run one manipulation episode: settle the object onto the resting
    surface, then run the 20 Hz controller against the physics integrator for
    cfg.duration seconds. Deterministic for a fixed (cfg, params, seed).
    plan overrides the group/direction assignment derived from the mode."""
    if plan is None:
        plan = build_plan(grid, mode)
    obj = RigidObject.box(obj_spec)

    rng = np.random.default_rng(cfg.seed)
    jitter = rng.normal(0.0, cfg.placement_jitter, 2) if cfg.placement_jitter > 0 else np.zeros(2)
    xy = initial_position(mode, grid) + jitter
    z0 = _rest_surface_height(params, geom) + obj.half_extents[2] + 2e-4
    obj.position = np.array([xy[0], xy[1], z0])

    plates = PlateBank(grid, geom, params)
    world = WorldState(obj=obj, plates=plates, geom=geom, contact=contact, cfg=cfg)

    ratios = contact_ratios(obj.footprint(), grid, geom)
    if not (ratios > 0.0).any():
        raise InvalidPlacementError("object does not overlap any plate")
    if mode.kind == "rotate":
        hit = np.flatnonzero(ratios > 0.0)
        rows = hit // grid.cols
        cols = hit % grid.cols
        if len(hit) < 4 or len(set(rows.tolist())) < 2 or len(set(cols.tolist())) < 2:
            raise InvalidPlacementError("rotation requires the object to span 2x2 plates")

    rest = np.zeros((grid.n_modules, 3))
    rest[:, 1] = params.psi0
    rest[:, 2] = params.h0
    n_settle = int(round(cfg.settle_time / cfg.dt))
    world.plates.set_commands(rest, cfg.max_iterations)
    for _ in range(n_settle):
        step(world)

    n_ticks = cfg.n_ticks
    n_sub = cfg.steps_per_tick
    n_samples = n_ticks + 1
    t_arr = np.zeros(n_samples)
    pos_arr = np.zeros((n_samples, 3))
    eul_arr = np.zeros((n_samples, 3))
    vel_arr = np.zeros((n_samples, 3))
    omg_arr = np.zeros((n_samples, 3))

    def record(k, t):
        t_arr[k] = t
        pos_arr[k] = obj.position
        eul_arr[k] = euler_zyx(obj.quat)
        vel_arr[k] = obj.velocity
        omg_arr[k] = obj.omega

    world.time = 0.0
    world.last_contact = 0.0
    record(0, 0.0)
    z_ride = obj.position[2]
    x_lo = -XY_MARGIN_SPACINGS * grid.spacing
    x_hi = ((grid.cols - 1) + XY_MARGIN_SPACINGS) * grid.spacing
    y_hi = ((grid.rows - 1) + XY_MARGIN_SPACINGS) * grid.spacing
    active_ticks = 0
    for tick in range(n_ticks):
        t = tick * cfg.controller_period
        commands, active = controller_step(t, obj.footprint(), plan, params, geom,
                                           controller_period=cfg.controller_period)
        active_ticks += int(active.any())
        world.plates.set_commands(commands, cfg.max_iterations)
        for _ in range(n_sub):
            step(world)
        if world.time - world.last_contact > FLIGHT_TIMEOUT:
            raise ObjectLostError(world.time, "ballistic flight")
        if obj.position[2] - z_ride > params.h_amp + Z_ENVELOPE:
            raise ObjectLostError(world.time, "bounced above the lift envelope")
        if not (x_lo <= obj.position[0] <= x_hi and x_lo <= obj.position[1] <= y_hi):
            raise ObjectLostError(world.time, "slid past the grid margin")
        record(tick + 1, (tick + 1) * cfg.controller_period)

    stats = dict(world.stats)
    stats["saturations"] = world.plates.saturations
    stats["active_ticks"] = active_ticks
    stats["mean_contacts"] = (stats.pop("contact_sum") / stats["contact_steps"]
                              if stats["contact_steps"] else 0.0)
    desc = dict(descriptor or {})
    desc.setdefault("mode", mode.label)
    desc.setdefault("object", obj_spec.as_dict())
    desc.setdefault("seed", cfg.seed)
    return TrajectoryLog(t=t_arr, position=pos_arr, euler=eul_arr,
                         velocity=vel_arr, omega=omg_arr, stats=stats,
                         descriptor=desc)
