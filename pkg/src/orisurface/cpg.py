"""Coupled-sinusoid command generator for plate height and inclination.

Each module tracks
    H(t)   = h_amp  * sin(2*pi*freq*t + group_phase) + h0
    psi(t) = psi_amp* sin(2*pi*freq*t + group_phase + sigma) + psi0
where group_phase is 0 for group 1 and phi for group 2. sigma selects the
push direction along the command azimuth: sigma in [0, pi) pushes positive,
sigma in [pi, 2*pi) negative. Modules assigned a negative direction sign use
sigma + pi, which mirrors the inclination about psi0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .kinematics import CanfieldGeometry, PlatePose, solve_joint_angles

TWO_PI = 2.0 * math.pi

# Legal parameter box (closed intervals); sigma spans both direction
# half-ranges, the optimizer restricts it per campaign.
PARAM_BOUNDS = {
    "h_amp": (0.005, 0.04),
    "psi_amp": (0.35, 0.79),
    "freq": (0.1, 0.8),
    "h0": (0.02, 0.04),
    "psi0": (-0.26, 0.26),
    "sigma": (0.0, TWO_PI),
    "phi": (0.0, TWO_PI),
    "epsilon": (0.1, 0.5),
}


@dataclass(frozen=True)
class CpgParams:
    """The eight searchable manipulation parameters.

    epsilon is the contact-ratio activation threshold used by the surface
    controller; it does not influence the oscillator itself.
    """

    h_amp: float
    psi_amp: float
    freq: float
    h0: float
    psi0: float
    sigma: float
    phi: float
    epsilon: float

    def __post_init__(self):
        for name, (lo, hi) in PARAM_BOUNDS.items():
            val = getattr(self, name)
            if not (lo - 1e-12 <= val <= hi + 1e-12):
                raise ValueError(f"{name}={val} outside legal range [{lo}, {hi}]")

    def as_dict(self):
        return {k: float(getattr(self, k)) for k in PARAM_BOUNDS}

    def with_sigma(self, sigma):
        return replace(self, sigma=sigma % TWO_PI)


@dataclass(frozen=True)
class Direction:
    """Per-module command azimuth and push sign along it."""

    delta_cmd: float
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")


def cpg_height(t, p: CpgParams, group_phase=0.0):
    """Commanded plate height at time(s) t for one group."""
    t = np.asarray(t, float)
    return p.h_amp * np.sin(TWO_PI * p.freq * t + group_phase) + p.h0


def cpg_inclination(t, p: CpgParams, group_phase=0.0, sigma=None):
    """Commanded inclination at time(s) t; sigma overrides the stored phase
    shift (used for sign-flipped modules)."""
    t = np.asarray(t, float)
    s = p.sigma if sigma is None else sigma
    return p.psi_amp * np.sin(TWO_PI * p.freq * t + group_phase + s) + p.psi0


def effective_sigma(p: CpgParams, direction: Direction):
    """sigma actually applied for a module: negative-sign modules shift by pi,
    mirroring the inclination trajectory about psi0."""
    return p.sigma if direction.sign > 0 else (p.sigma + math.pi) % TWO_PI


def module_command(t, p: CpgParams, group_phase, direction: Direction):
    """PlatePose command for one module at time t."""
    h = float(cpg_height(t, p, group_phase))
    psi = float(cpg_inclination(t, p, group_phase, sigma=effective_sigma(p, direction)))
    return PlatePose(delta=direction.delta_cmd, psi=psi, height=h)


def command_extremes_feasible(p: CpgParams, geom: CanfieldGeometry = CanfieldGeometry(),
                              delta_cmds=(0.0,), signs=(1,), samples_per_period=64):
    """Conservative screen: every sampled command over one period must be
    IK-feasible for each (azimuth, sign) the plan will use, and so must the
    rest pose. Infeasible parameter sets are rejected before simulation."""
    t = np.arange(samples_per_period) / (samples_per_period * p.freq)
    h = cpg_height(t, p)
    for delta_cmd in delta_cmds:
        cd, sd = math.cos(delta_cmd), math.sin(delta_cmd)
        for sign in signs:
            sigma = effective_sigma(p, Direction(delta_cmd, sign))
            psi = cpg_inclination(t, p, sigma=sigma)
            _, ok = solve_joint_angles(psi * cd, psi * sd, h, geom)
            if not bool(np.all(ok)):
                return False
    _, ok = solve_joint_angles(p.psi0, 0.0, p.h0, geom)
    return bool(np.all(ok))


def trace(p: CpgParams, duration=None, rate=20.0):
    """Sampled (t, H_g1, psi_g1, H_g2, psi_g2) arrays for plotting the two
    group trajectories; defaults to two periods at the controller rate."""
    if duration is None:
        duration = 2.0 / p.freq
    n = int(round(duration * rate)) + 1
    t = np.arange(n) / rate
    return (t,
            cpg_height(t, p, 0.0), cpg_inclination(t, p, 0.0),
            cpg_height(t, p, p.phi), cpg_inclination(t, p, p.phi))
