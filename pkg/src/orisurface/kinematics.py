"""Closed-form inverse kinematics, numerical forward kinematics and workspace
analysis for a single 3-DoF parallel-origami module.

The top plate pose is (delta, psi, height): delta is the azimuth of the
plate's downhill direction, psi the inclination angle and height the plate
center height. delta is measured from the world +Y axis toward +X (delta=0
tilts the plate downhill toward +Y, delta=pi/2 toward +X, matching the
manipulation-axis convention). Internally most code works with the world
tilt components (tx, ty) = (psi*sin(delta), psi*cos(delta)), which are
singularity-free at psi=0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class InfeasiblePoseError(ValueError):
    """Raised when no joint solution exists for a requested plate pose."""

    def __init__(self, pose, legs=None):
        self.pose = pose
        self.legs = tuple(legs) if legs is not None else ()
        detail = f" (legs {list(self.legs)})" if self.legs else ""
        super().__init__(f"pose {pose} is outside the module workspace{detail}")


class NoConvergenceError(RuntimeError):
    """Forward kinematics failed to converge; carries the best residual seen."""

    def __init__(self, best_residual):
        self.best_residual = float(best_residual)
        super().__init__(
            f"forward kinematics did not converge (best residual {best_residual:.3e} rad)"
        )


@dataclass(frozen=True)
class CanfieldGeometry:
    """Fixed geometry of one module.

    link_length and joint_radius are the 30 mm links and the 20.21 mm joint
    circle of the reference design; leg_azimuths must stay pairwise distinct.
    """

    link_length: float = 0.030
    joint_radius: float = 0.02021
    leg_azimuths: tuple = (0.0, TWO_PI / 3.0, 2.0 * TWO_PI / 3.0)
    theta_min: float = 0.0
    theta_max: float = math.pi / 2.0
    plate_side: float = 0.100

    def __post_init__(self):
        if self.link_length <= 0.0 or self.joint_radius <= 0.0:
            raise ValueError("link_length and joint_radius must be positive")
        if self.plate_side <= 0.0:
            raise ValueError("plate_side must be positive")
        if not self.theta_min < self.theta_max:
            raise ValueError("theta_min must be below theta_max")
        az = [a % TWO_PI for a in self.leg_azimuths]
        for i in range(len(az)):
            for j in range(i + 1, len(az)):
                if abs(az[i] - az[j]) < 1e-9:
                    raise ValueError("leg azimuths must be pairwise distinct")

    @property
    def max_height(self):
        """Plate height at full symmetric extension (theta = pi/2)."""
        return 2.0 * self.link_length * math.sin(self.theta_max)


@dataclass(frozen=True)
class PlatePose:
    """Top plate pose: tilt azimuth delta (wrapped to [0, 2pi)), inclination
    psi in (-pi/2, pi/2) and plate center height in meters."""

    delta: float
    psi: float
    height: float

    def __post_init__(self):
        if not self.height > 0.0:
            raise ValueError("height must be positive")
        if not -math.pi / 2.0 < self.psi < math.pi / 2.0:
            raise ValueError("psi must lie in (-pi/2, pi/2)")
        object.__setattr__(self, "delta", self.delta % TWO_PI)

    @property
    def tilt_xy(self):
        """World tilt components (psi*sin(delta), psi*cos(delta)): the tilt
        toward +X and toward +Y."""
        return (self.psi * math.sin(self.delta), self.psi * math.cos(self.delta))

    @staticmethod
    def from_tilt(tx, ty, height):
        return PlatePose(delta=math.atan2(tx, ty), psi=math.hypot(tx, ty), height=height)


@dataclass(frozen=True)
class JointAngles:
    """Per-leg actuation angles, each within [theta_min, theta_max]."""

    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))


@dataclass
class WorkspaceBand:
    """Feasibility raster of the tilt disk for a band of plate heights.

    The raster covers (u, v) in [-psi_max, psi_max]^2; a cell is feasible iff
    the IK succeeds at every sampled height of the band. feasible_area is the
    number of feasible cells times the cell area of the tilt raster.
    """

    h_low: float
    h_high: float
    resolution: int
    psi_max: float
    mask: np.ndarray = field(repr=False)
    axis: np.ndarray = field(repr=False)

    @property
    def cell_area(self):
        return (2.0 * self.psi_max / self.resolution) ** 2

    @property
    def feasible_area(self):
        return float(self.mask.sum()) * self.cell_area

    def sector_area(self, delta_center, half_width):
        """Feasible area restricted to tilt azimuths within half_width of
        delta_center (used to compare opposite manipulation directions)."""
        tx, ty = np.meshgrid(self.axis, self.axis, indexing="xy")
        delta = np.arctan2(tx, ty)
        off = np.arctan2(np.sin(delta - delta_center), np.cos(delta - delta_center))
        sel = self.mask & (np.abs(off) <= half_width)
        return float(sel.sum()) * self.cell_area


def solve_joint_angles(tx, ty, height, geom: CanfieldGeometry):
    """Vectorized IK core on world tilt components (tx, ty).

    Broadcasts tx, ty, height; returns (theta, feasible) where theta has a
    trailing axis of len(leg_azimuths) and feasible marks inputs for which
    every leg has a root with theta in [theta_min, theta_max]. theta entries
    of failed legs are NaN. Root selection: the smaller in-range theta.
    """
    tx = np.asarray(tx, float)
    ty = np.asarray(ty, float)
    height = np.asarray(height, float)
    tx, ty, height = np.broadcast_arrays(tx, ty, height)
    psi2 = tx * tx + ty * ty
    psi = np.sqrt(psi2)

    half = 0.5 * psi
    cos_half = np.cos(half)
    # sin(psi/2)*cos(delta-gamma) = k(psi)*(tx*sin(gamma) + ty*cos(gamma)),
    # k = sin(psi/2)/psi; the series keeps it smooth through psi=0.
    small = psi < 1e-8
    k = np.where(small, 0.5 - psi2 / 48.0, np.sin(half) / np.where(small, 1.0, psi))

    r0 = height / cos_half
    l = geom.link_length
    r = geom.joint_radius

    sin_g = np.sin(geom.leg_azimuths)
    cos_g = np.cos(geom.leg_azimuths)
    e = k[..., None] * (tx[..., None] * sin_g + ty[..., None] * cos_g)
    half_r0 = (0.5 * r0)[..., None]
    a = (r - l) * e - half_r0
    c = (r + l) * e - half_r0
    b = (2.0 * l) * cos_half[..., None]

    t_lo = math.tan(0.5 * geom.theta_min)
    t_hi = math.tan(0.5 * geom.theta_max)
    tol = 1e-12

    b2 = b * b
    disc = b2 - 4.0 * a * c
    ok = disc >= -1e-12 * b2
    # stable quadratic roots; b > 0 always (cos_half > 0)
    q = -0.5 * (b + np.sqrt(np.maximum(disc, 0.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(a != 0.0, q / np.where(a == 0.0, 1.0, a), np.inf)
        t2 = np.where(q != 0.0, c / np.where(q == 0.0, 1.0, q), np.inf)
    in1 = ok & (t1 >= t_lo - tol) & (t1 <= t_hi + tol)
    in2 = ok & (t2 >= t_lo - tol) & (t2 <= t_hi + tol)
    t_best = np.where(in1 & in2, np.minimum(t1, t2),
                      np.where(in1, t1, np.where(in2, t2, np.nan)))
    leg_ok = in1 | in2
    theta = 2.0 * np.arctan(np.clip(t_best, t_lo, t_hi))
    theta = np.where(leg_ok, theta, np.nan)
    feasible = (height > 0.0) & (psi < math.pi / 2.0) & leg_ok.all(axis=-1)
    return theta, feasible


def inverse_kinematics(pose: PlatePose, geom: CanfieldGeometry = CanfieldGeometry()):
    """Closed-form IK. Raises InfeasiblePoseError when any leg has no root
    with theta in [theta_min, theta_max]."""
    u, v = pose.tilt_xy
    theta, feasible = solve_joint_angles(u, v, pose.height, geom)
    theta = np.atleast_1d(theta.ravel())
    if not bool(feasible):
        bad = [i for i, t in enumerate(theta) if not np.isfinite(t)]
        raise InfeasiblePoseError(pose, legs=bad)
    return JointAngles(theta=tuple(float(t) for t in theta))


def _fk_batch(target, geom, tol=1e-10, max_iter=100, extra_seed=None):
    """Damped Gauss-Newton over (u, v, H) for a batch of target joint angles.

    target: (n, 3). Returns (states (n,3), residual (n,), converged (n,)).
    """
    target = np.asarray(target, float)
    n = target.shape[0]
    l = geom.link_length
    h_cap = geom.max_height

    def residual(states):
        th, feas = solve_joint_angles(states[:, 0], states[:, 1], states[:, 2], geom)
        res = th - target
        bad = ~feas
        res[bad] = np.inf
        norm = np.max(np.abs(res), axis=-1)
        return res, norm

    # 8 multi-start seeds: the symmetric estimate first, then tilted rings
    h_seed = np.clip(2.0 * l * np.sin(np.mean(target, axis=-1)), 1e-4, h_cap)
    seeds = [(0.0, 0.0)]
    seeds += [(0.18 * math.cos(a), 0.18 * math.sin(a)) for a in np.arange(4) * (math.pi / 2.0)]
    seeds += [(0.45 * math.cos(a), 0.45 * math.sin(a)) for a in np.arange(3) * (TWO_PI / 3.0) + 0.3]
    if extra_seed is not None:
        seeds.insert(0, tuple(extra_seed[:2]))

    best = np.zeros((n, 3))
    best[:, 2] = h_seed
    best_norm = np.full(n, np.inf)
    converged = np.zeros(n, bool)

    for su, sv in seeds:
        todo = ~converged
        if not todo.any():
            break
        x = np.zeros((n, 3))
        x[:, 0] = su
        x[:, 1] = sv
        x[:, 2] = h_seed
        x = x[todo]
        tgt_idx = np.flatnonzero(todo)
        res, norm = residual(x)
        for _ in range(max_iter):
            live = norm > tol
            if not live.any():
                break
            # central-difference Jacobian, 3x3 per row; rows that poke into
            # infeasible territory get zeroed columns (inf - inf)
            eps = 1e-7
            jac = np.empty((x.shape[0], 3, 3))
            with np.errstate(invalid="ignore"):
                for d in range(3):
                    xp = x.copy()
                    xm = x.copy()
                    xp[:, d] += eps
                    xm[:, d] -= eps
                    rp, _ = residual(xp)
                    rm, _ = residual(xm)
                    col = (rp - rm) / (2.0 * eps)
                    col[~np.isfinite(col)] = 0.0
                    jac[:, :, d] = col
            rhs = np.where(np.isfinite(res), res, 0.0)
            # damped solve; singular rows fall back to steepest descent
            jtj = jac.transpose(0, 2, 1) @ jac + 1e-12 * np.eye(3)
            jtr = np.einsum("nij,ni->nj", jac, rhs)
            try:
                step = np.linalg.solve(jtj, jtr[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = jtr
            alpha = np.ones(x.shape[0])
            improved = np.zeros(x.shape[0], bool)
            x_new = x.copy()
            res_new = res.copy()
            norm_new = norm.copy()
            for _ in range(8):
                trial = x - alpha[:, None] * step
                trial[:, 2] = np.clip(trial[:, 2], 1e-5, h_cap)
                r_t, n_t = residual(trial)
                gain = (n_t < norm) & live & ~improved
                x_new[gain] = trial[gain]
                res_new[gain] = r_t[gain]
                norm_new[gain] = n_t[gain]
                improved |= gain
                alpha = np.where(improved, alpha, alpha * 0.5)
                if improved[live].all():
                    break
            if not improved.any():
                break
            x, res, norm = x_new, res_new, norm_new
        better = norm < best_norm[tgt_idx]
        best[tgt_idx[better]] = x[better]
        best_norm[tgt_idx[better]] = norm[better]
        converged[tgt_idx] |= norm <= tol

    return best, best_norm, converged


def forward_kinematics(angles: JointAngles, geom: CanfieldGeometry = CanfieldGeometry(),
                       seed_pose: PlatePose | None = None):
    """Numerical FK: finds the plate pose whose IK reproduces the given
    angles. Multi-start damped Gauss-Newton; raises NoConvergenceError with
    the best residual after exhausting seeds. delta is reported as 0 when
    the solution is untilted."""
    target = np.asarray(angles.theta, float)[None, :]
    extra = None
    if seed_pose is not None:
        extra = (*seed_pose.tilt_xy, seed_pose.height)
    states, norms, ok = _fk_batch(target, geom, extra_seed=extra)
    if not bool(ok[0]):
        raise NoConvergenceError(norms[0])
    u, v, h = states[0]
    if math.hypot(u, v) < 1e-9:
        return PlatePose(delta=0.0, psi=float(math.hypot(u, v)), height=float(h))
    return PlatePose.from_tilt(float(u), float(v), float(h))


def workspace_area(h_low, h_high, geom: CanfieldGeometry = CanfieldGeometry(),
                   resolution=64, psi_max=math.pi / 2.0, height_samples=8):
    """Rasterize feasibility of the tilt disk over a height band.

    A cell is feasible iff IK succeeds at every sampled height in
    [h_low, h_high] at the cell's (psi, delta).
    """
    if not 0.0 < h_low < h_high <= geom.max_height + 1e-12:
        raise ValueError("band must satisfy 0 < h_low < h_high <= 2*l*sin(theta_max)")
    step = 2.0 * psi_max / resolution
    axis = -psi_max + step * (np.arange(resolution) + 0.5)
    u, v = np.meshgrid(axis, axis, indexing="xy")
    mask = np.ones(u.shape, bool)
    for h in np.linspace(h_low, h_high, height_samples):
        _, feas = solve_joint_angles(u, v, np.full_like(u, h), geom)
        mask &= feas
    return WorkspaceBand(h_low=float(h_low), h_high=float(h_high), resolution=resolution,
                         psi_max=float(psi_max), mask=mask, axis=axis)


def tilt_matrix(tx, ty):
    """Rotation matrices for world tilt components: rotation by psi=|(tx,ty)|
    taking the flat plate to one whose surface rises toward the tilt azimuth
    (tx, ty) (the plate pushes an object it engages toward that azimuth; its
    downhill direction is the opposite one). Broadcasts to (..., 3, 3)."""
    tx = np.asarray(tx, float)
    ty = np.asarray(ty, float)
    tx, ty = np.broadcast_arrays(tx, ty)
    psi = np.hypot(tx, ty)
    small = psi < 1e-8
    s = np.where(small, 1.0 - psi * psi / 6.0, np.sin(psi) / np.where(small, 1.0, psi))
    c2 = np.where(small, 0.5 - psi * psi / 24.0,
                  (1.0 - np.cos(psi)) / np.where(small, 1.0, psi * psi))
    # rotation vector is psi * (z_hat x uphill_unit) = (ty, -tx, 0)
    rx, ry = ty, -tx
    zeros = np.zeros_like(tx)
    kx = np.stack([
        np.stack([zeros, zeros, ry], axis=-1),
        np.stack([zeros, zeros, -rx], axis=-1),
        np.stack([-ry, rx, zeros], axis=-1),
    ], axis=-2)
    eye = np.broadcast_to(np.eye(3), kx.shape)
    return eye + s[..., None, None] * kx + c2[..., None, None] * (kx @ kx)


def plate_polygon(pose: PlatePose, module_origin, geom: CanfieldGeometry = CanfieldGeometry()):
    """World-frame corners (4, 3) of the square top plate for a pose, centered
    at (module_origin, height) and tilted per the pose. Counter-clockwise
    when seen from above."""
    u, v = pose.tilt_xy
    rot = tilt_matrix(u, v)
    half = 0.5 * geom.plate_side
    local = np.array([
        [half, -half, 0.0],
        [half, half, 0.0],
        [-half, half, 0.0],
        [-half, -half, 0.0],
    ])
    center = np.array([module_origin[0], module_origin[1], pose.height])
    return center + local @ np.asarray(rot).T
