"""Coarse-grid scale maps and their dense, detector-ready channel form.

The scale field over a planar scene is smooth, so it is sampled on a
stride-anchored grid and bilinearly interpolated back to full resolution.
Grid nodes that see no ground carry the sentinel ``SENTINEL`` (+inf, the
monotone continuation of "infinitely far").
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import HORIZON_GUARD_PX, CameraRig, scale_from_pixels

SENTINEL = math.inf

DEFAULT_STRIDE = 32


class InvalidStride(Exception):
    pass


class OutOfBounds(Exception):
    pass


@dataclass(frozen=True)
class ScaleEncoding:
    """Linear 8-bit encoding of meters-per-pixel into a channel.

    Values are clamped to ``[s_min, s_max]`` then mapped to 0..255;
    sentinel (no-ground) pixels encode to ``sentinel_value``.
    """

    s_min: float = 0.001
    s_max: float = 0.05
    sentinel_value: int = 255

    def __post_init__(self):
        if not 0 < self.s_min < self.s_max:
            raise ValueError("require 0 < s_min < s_max")
        if not 0 <= self.sentinel_value <= 255:
            raise ValueError("sentinel_value must fit in a byte")


@dataclass(frozen=True)
class ScaleMap:
    """Scale grid sampled at pixel positions ``(i*stride, j*stride)``.

    ``grid[j, i]`` holds meters-per-pixel at pixel ``(i*stride, j*stride)``
    or ``SENTINEL`` above the horizon; the grid extends one node past the
    image edge so every full-resolution pixel falls inside a cell.
    """

    stride: int
    grid: np.ndarray
    width: int
    height: int


def build_scale_map(
    rig: CameraRig, stride: int = DEFAULT_STRIDE, guard_px: float = HORIZON_GUARD_PX
) -> ScaleMap:
    """Sample the exact scale field on the stride grid.

    Every grid node equals the direct per-pixel scale at that position, or
    the sentinel where no ground is visible.
    """
    if int(stride) < 1:
        raise InvalidStride(f"stride must be >= 1, got {stride}")
    stride = int(stride)
    intr = rig.intrinsics
    nu = math.ceil(intr.width / stride) + 1
    nv = math.ceil(intr.height / stride) + 1
    us, vs = np.meshgrid(
        np.arange(nu, dtype=np.float64) * stride,
        np.arange(nv, dtype=np.float64) * stride,
    )
    grid = scale_from_pixels(rig, us, vs, guard_px=guard_px)
    grid = np.where(np.isfinite(grid), grid, SENTINEL)
    grid.flags.writeable = False
    return ScaleMap(stride=stride, grid=grid, width=intr.width, height=intr.height)


# Interpolation runs on S**_LIN_POWER.  For an undistorted view of a
# plane the pixel-to-ground map is a homography, whose Jacobian
# determinant is det(H) / (linear form)^3; the scale S = sqrt|det J| is
# therefore (linear form)^(-3/2), and S^(-2/3) is linear in pixel
# coordinates.  Bilinear interpolation in that domain is exact up to the
# finite-difference residue, while raw-S bilinear overshoots badly in
# cells whose upper nodes approach the horizon.
_LIN_POWER = -2.0 / 3.0


def _bilinear(smap: ScaleMap, u, v):
    g = smap.grid
    gu = np.asarray(u, dtype=np.float64) / smap.stride
    gv = np.asarray(v, dtype=np.float64) / smap.stride
    i0 = np.minimum(np.floor(gu).astype(np.intp), g.shape[1] - 2)
    j0 = np.minimum(np.floor(gv).astype(np.intp), g.shape[0] - 2)
    fu = gu - i0
    fv = gv - j0
    n00 = g[j0, i0]
    n01 = g[j0, i0 + 1]
    n10 = g[j0 + 1, i0]
    n11 = g[j0 + 1, i0 + 1]
    finite = np.isfinite(n00) & np.isfinite(n01) & np.isfinite(n10) & np.isfinite(n11)
    with np.errstate(invalid="ignore", divide="ignore"):
        top = n00**_LIN_POWER * (1.0 - fu) + n01**_LIN_POWER * fu
        bot = n10**_LIN_POWER * (1.0 - fu) + n11**_LIN_POWER * fu
        out = (top * (1.0 - fv) + bot * fv) ** (1.0 / _LIN_POWER)
    # Any sentinel corner poisons the whole cell, except exactly on a
    # node, where interpolation degenerates to the node itself.
    out = np.where(finite, out, SENTINEL)
    on_node = (fu == 0.0) & (fv == 0.0)
    return np.where(on_node, n00, out)


def sample(smap: ScaleMap, px) -> float:
    """Interpolated scale at a full-resolution position.

    Bilinear over the four surrounding grid nodes in the linearizing
    ``S**(-2/3)`` domain; exactly the node value on a node.  Returns
    ``SENTINEL`` if any of the four nodes is a sentinel.  Raises
    :class:`OutOfBounds` outside the image.
    """
    u, v = float(px[0]), float(px[1])
    if not (0.0 <= u < smap.width and 0.0 <= v < smap.height):
        raise OutOfBounds(f"pixel {px!r} outside {smap.width}x{smap.height}")
    return float(_bilinear(smap, u, v))


def sample_dense(smap: ScaleMap) -> np.ndarray:
    """Interpolated scale for every pixel, as a float64 ``(H, W)`` array."""
    us, vs = np.meshgrid(
        np.arange(smap.width, dtype=np.float64),
        np.arange(smap.height, dtype=np.float64),
    )
    return _bilinear(smap, us, vs)


def to_channel(smap: ScaleMap, enc: ScaleEncoding = ScaleEncoding()) -> np.ndarray:
    """Encode the interpolated scale field as a uint8 plane ``(H, W)``.

    The mapping is monotone in the scale value; sentinel pixels get
    ``enc.sentinel_value``.
    """
    dense = sample_dense(smap)
    finite = np.isfinite(dense)
    clamped = np.clip(dense, enc.s_min, enc.s_max)
    coded = np.rint(255.0 * (clamped - enc.s_min) / (enc.s_max - enc.s_min))
    out = np.where(finite, coded, float(enc.sentinel_value))
    return out.astype(np.uint8)
