"""Four-plane (R, G, B, S) frames, the detector-ready fusion of color and
scale.  Planes are stored planar so per-plane work never strides through
interleaved bytes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class Frame4:
    """Planar 4-channel 8-bit frame; ``planes`` has shape (4, H, W)."""

    planes: np.ndarray

    def __post_init__(self):
        p = self.planes
        if p.ndim != 3 or p.shape[0] != 4 or p.dtype != np.uint8:
            raise ValueError("planes must be a (4, H, W) uint8 array")

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]


def fuse(rgb: np.ndarray, s_plane: np.ndarray) -> Frame4:
    """Stack an (H, W, 3) RGB image and an (H, W) scale plane into a frame.

    Raises :class:`DimensionMismatch` when shapes disagree; the bytes are
    copied verbatim, so a later :func:`split` returns byte-identical data.
    """
    rgb = np.asarray(rgb, dtype=np.uint8)
    s_plane = np.asarray(s_plane, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("rgb must have shape (H, W, 3)")
    if s_plane.ndim != 2:
        raise ValueError("s_plane must have shape (H, W)")
    if rgb.shape[:2] != s_plane.shape:
        raise DimensionMismatch(f"rgb {rgb.shape[:2]} vs s {s_plane.shape}")
    planes = np.empty((4,) + s_plane.shape, dtype=np.uint8)
    planes[0] = rgb[:, :, 0]
    planes[1] = rgb[:, :, 1]
    planes[2] = rgb[:, :, 2]
    planes[3] = s_plane
    return Frame4(planes)


def split(frame: Frame4) -> tuple[np.ndarray, np.ndarray]:
    """Exact inverse of :func:`fuse`: returns (rgb, s_plane) copies."""
    rgb = np.stack([frame.planes[0], frame.planes[1], frame.planes[2]], axis=-1)
    return rgb, frame.planes[3].copy()
