import math

import numpy as np
import pytest

from fieldscale.geometry import (
    CameraIntrinsics,
    CameraPose,
    CameraRig,
    horizon_distance_px,
)


@pytest.fixture
def intr_640():
    return CameraIntrinsics(fx=700.0, fy=700.0, cx=320.0, cy=240.0, width=640, height=480)


@pytest.fixture
def rig_pitch45(intr_640):
    return CameraRig(intr_640, CameraPose(height=0.6, pitch=math.radians(-45)))


@pytest.fixture
def rig_nadir(intr_640):
    return CameraRig(intr_640, CameraPose(height=0.6, pitch=math.radians(-90)))


@pytest.fixture
def rig_shallow(intr_640):
    # Horizon crosses the image: rows above ~52 see sky.
    return CameraRig(intr_640, CameraPose(height=0.6, pitch=math.radians(-15)))


@pytest.fixture
def rig_synth():
    # Wide view of the ground (0.2 m to ~3.8 m ahead) for scene tests.
    intr = CameraIntrinsics(fx=400.0, fy=400.0, cx=320.0, cy=240.0, width=640, height=480)
    return CameraRig(intr, CameraPose(height=0.6, pitch=math.radians(-40)))


@pytest.fixture
def rig_distorted():
    intr = CameraIntrinsics(
        fx=700.0, fy=700.0, cx=320.0, cy=240.0, width=640, height=480, k1=-0.1
    )
    return CameraRig(intr, CameraPose(height=0.6, pitch=math.radians(-45)))


def sample_below_horizon(rig, n, rng, min_depth_px=5.0):
    """Uniform pixels at least ``min_depth_px`` below the horizon line."""
    intr = rig.intrinsics
    out_u, out_v = [], []
    while len(out_u) < n:
        u = rng.uniform(0, intr.width - 1, size=4 * n)
        v = rng.uniform(0, intr.height - 1, size=4 * n)
        depth = horizon_distance_px(rig, u, v)
        keep = depth >= min_depth_px
        out_u.extend(u[keep])
        out_v.extend(v[keep])
    return np.array(out_u[:n]), np.array(out_v[:n])


def random_rig(rng, width=1440, height=1088, k1=0.0, k2=0.0):
    """Rig drawn from the tilted-camera envelope the package targets."""
    f = rng.uniform(500.0, 900.0)
    return CameraRig(
        CameraIntrinsics(
            fx=f,
            fy=f,
            cx=width / 2 + rng.uniform(-5, 5),
            cy=height / 2 + rng.uniform(-5, 5),
            width=width,
            height=height,
            k1=k1,
            k2=k2,
        ),
        CameraPose(
            height=rng.uniform(0.4, 0.8),
            pitch=math.radians(rng.uniform(-60.0, -20.0)),
            roll=math.radians(rng.uniform(-3.0, 3.0)),
            yaw=math.radians(rng.uniform(-10.0, 10.0)),
        ),
    )
