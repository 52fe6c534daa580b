"""Manipulation quality measures of a trajectory and the weighted episode
cost used by the optimizer.

Translational and yaw speeds are net displacement over duration (transport
speeds, not path-length speeds); roll/pitch come from the Z-Y-X Euler angles
logged with the trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TrajectoryLog


class EmptyLogError(ValueError):
    pass


@dataclass(frozen=True)
class ManipulationMetrics:
    v: float          # |net planar displacement| / duration, m/s
    omega: float      # |net yaw| / duration, rad/s
    max_roll: float   # max |roll(t)|, rad
    max_pitch: float  # max |pitch(t)|, rad
    max_z: float      # max |z(t) - z(0)|, m

    def as_dict(self):
        return {"v": self.v, "omega": self.omega, "max_roll": self.max_roll,
                "max_pitch": self.max_pitch, "max_z": self.max_z}

    @staticmethod
    def from_dict(d):
        return ManipulationMetrics(v=d["v"], omega=d["omega"],
                                   max_roll=d["max_roll"],
                                   max_pitch=d["max_pitch"], max_z=d["max_z"])


@dataclass(frozen=True)
class CostWeights:
    """Weights on (v, omega, max roll + max pitch, max z)."""

    alpha: float
    beta: float
    gamma: float
    varsigma: float


def compute_metrics(log: TrajectoryLog) -> ManipulationMetrics:
    if len(log) < 2:
        raise EmptyLogError("trajectory needs at least two samples")
    duration = float(log.t[-1] - log.t[0])
    if duration <= 0.0:
        raise EmptyLogError("trajectory duration is zero")
    planar = log.position[-1, :2] - log.position[0, :2]
    yaw = np.unwrap(log.euler[:, 2])
    return ManipulationMetrics(
        v=float(np.hypot(planar[0], planar[1])) / duration,
        omega=abs(float(yaw[-1] - yaw[0])) / duration,
        max_roll=float(np.max(np.abs(log.euler[:, 0]))),
        max_pitch=float(np.max(np.abs(log.euler[:, 1]))),
        max_z=float(np.max(np.abs(log.position[:, 2] - log.position[0, 2]))),
    )


def cost(m: ManipulationMetrics, w: CostWeights) -> float:
    """J = alpha*v + beta*omega + gamma*(max_roll + max_pitch) + varsigma*max_z."""
    return (w.alpha * m.v + w.beta * m.omega
            + w.gamma * (m.max_roll + m.max_pitch) + w.varsigma * m.max_z)
