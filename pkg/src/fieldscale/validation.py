"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np

from .frames import Frame4
from .geometry import CameraRig


def check_rgb_image(x) -> np.ndarray:
    """Coerce to a (H, W, 3) uint8 array or raise ValueError."""
    arr = np.asarray(x)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255:
            arr = arr.astype(np.uint8)
        else:
            raise ValueError(f"expected uint8 channels, got {arr.dtype}")
    return arr


def check_plane(x) -> np.ndarray:
    """Coerce to a (H, W) uint8 array or raise ValueError."""
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) plane, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 plane, got {arr.dtype}")
    return arr


def check_rig(rig) -> CameraRig:
    if not isinstance(rig, CameraRig):
        raise ValueError(f"expected a CameraRig, got {type(rig).__name__}")
    return rig


def is_image_batch(x) -> bool:
    """True when ``x`` is a sequence of images rather than one image."""
    if isinstance(x, np.ndarray):
        return x.ndim == 4
    if isinstance(x, Frame4):
        return False
    return isinstance(x, (list, tuple))
