import numpy as np
import pytest

from orisurface.cpg import CpgParams
from orisurface.dynamics import ObjectSpec, SimConfig
from orisurface.kinematics import CanfieldGeometry


@pytest.fixture
def geom():
    return CanfieldGeometry()


@pytest.fixture
def fast_params():
    # a hand-picked parameter set that transports well in +axis direction
    return CpgParams(h_amp=0.02, psi_amp=0.5, freq=0.6, h0=0.03, psi0=0.0,
                     sigma=0.583 * np.pi, phi=np.pi, epsilon=0.2)


@pytest.fixture
def plate_object():
    # 300x300 mm, 254 g plate analogue
    return ObjectSpec(size=(0.3, 0.3, 0.01), mass=0.254)


@pytest.fixture
def coarse_cfg():
    return SimConfig(seed=3, placement_jitter=0.0).coarse()


def random_feasible_poses(geom, n, seed=42, theta_margin=0.02):
    """Rejection-sample n IK-feasible tilt states (tx, ty, h), keeping a
    margin from the fully-extended singular branch."""
    from orisurface.kinematics import solve_joint_angles
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        tx, ty = rng.uniform(-0.7, 0.7, 2)
        h = rng.uniform(0.008, 0.058)
        th, ok = solve_joint_angles(tx, ty, h, geom)
        if bool(ok) and np.max(th) < geom.theta_max - theta_margin:
            out.append((tx, ty, h))
    return np.array(out)
