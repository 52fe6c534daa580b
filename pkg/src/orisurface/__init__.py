"""Simulation and CPG parameter optimization for a grid of 3-DoF
parallel-origami modules manipulating rigid objects."""

from .cpg import CpgParams, Direction
from .dynamics import (ContactParams, ObjectSpec, RigidObject, SimConfig,
                       TrajectoryLog, simulate_episode)
from .kinematics import (CanfieldGeometry, JointAngles, PlatePose,
                         forward_kinematics, inverse_kinematics,
                         plate_polygon, workspace_area)
from .metrics import CostWeights, ManipulationMetrics, compute_metrics, cost
from .optimizer import Campaign, SearchSpace, evaluate, mode_presets, optimize
from .surface import (ManipulationMode, ModuleGrid, SurfacePlan,
                      assign_rotation, assign_translation, build_plan,
                      contact_ratio, controller_step, parse_mode)

__version__ = "0.1.0"

__all__ = [
    "CpgParams", "Direction", "ContactParams", "ObjectSpec", "RigidObject",
    "SimConfig", "TrajectoryLog", "simulate_episode", "CanfieldGeometry",
    "JointAngles", "PlatePose", "forward_kinematics", "inverse_kinematics",
    "plate_polygon", "workspace_area", "CostWeights", "ManipulationMetrics",
    "compute_metrics", "cost", "Campaign", "SearchSpace", "evaluate",
    "mode_presets", "optimize", "ManipulationMode", "ModuleGrid",
    "SurfacePlan", "assign_rotation", "assign_translation", "build_plan",
    "contact_ratio", "controller_step", "parse_mode", "__version__",
]
