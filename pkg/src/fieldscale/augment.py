"""Seeded augmentation of 4-plane frames and their boxes.

Geometric jitter is one composite affine applied identically to all four
planes (the scale plane is resampled like any other; its values are then
approximate for the virtual new view, which training pipelines accept).
Color jitter touches only the RGB planes.

The composite is built about the image center ``((W-1)/2, (H-1)/2)`` in
application order hflip -> scale -> shear -> rotate -> translate, so a
pure horizontal flip lands exactly on the mirrored pixel grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .boxes import DetectionBox
from .classiccv import hsv_to_rgb, rgb_to_hsv
from .frames import Frame4

RGB_FILL = 0
S_FILL = 255  # out-of-frame reads as "no ground information"

MIN_BOX_AREA_PX = 4.0
MIN_VISIBLE_FRACTION = 0.25


@dataclass(frozen=True)
class AugmentationRanges:
    """Half-widths of the uniform jitter ranges."""

    translate_frac: float = 0.10
    rotate_deg: float = 5.0
    shear_deg: float = 2.0
    scale_frac: float = 0.10
    hflip_prob: float = 0.5
    sat_frac: float = 0.50
    val_frac: float = 0.50

    def __post_init__(self):
        for name in ("translate_frac", "rotate_deg", "shear_deg", "scale_frac", "sat_frac", "val_frac"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError("hflip_prob must lie in [0, 1]")


@dataclass(frozen=True)
class AugmentationParams:
    """One concrete draw from the ranges; records the seed that made it."""

    tx: float = 0.0
    ty: float = 0.0
    angle: float = 0.0
    shear_x: float = 0.0
    shear_y: float = 0.0
    scale: float = 1.0
    hflip: bool = False
    sat_mult: float = 1.0
    val_mult: float = 1.0
    seed: int = 0


def sample_params(
    ranges: AugmentationRanges, width: int, height: int, seed: int
) -> AugmentationParams:
    """Draw parameters uniformly within each range, deterministically.

    Translations are fractions of the image size, so the pixel offsets
    need the frame dimensions.
    """
    rng = np.random.default_rng(seed)
    tx = rng.uniform(-ranges.translate_frac, ranges.translate_frac) * width
    ty = rng.uniform(-ranges.translate_frac, ranges.translate_frac) * height
    angle = math.radians(rng.uniform(-ranges.rotate_deg, ranges.rotate_deg))
    shear_x = math.radians(rng.uniform(-ranges.shear_deg, ranges.shear_deg))
    shear_y = math.radians(rng.uniform(-ranges.shear_deg, ranges.shear_deg))
    scale = 1.0 + rng.uniform(-ranges.scale_frac, ranges.scale_frac)
    hflip = bool(rng.random() < ranges.hflip_prob)
    sat_mult = 1.0 + rng.uniform(-ranges.sat_frac, ranges.sat_frac)
    val_mult = 1.0 + rng.uniform(-ranges.val_frac, ranges.val_frac)
    return AugmentationParams(
        tx=tx,
        ty=ty,
        angle=angle,
        shear_x=shear_x,
        shear_y=shear_y,
        scale=scale,
        hflip=hflip,
        sat_mult=sat_mult,
        val_mult=val_mult,
        seed=seed,
    )


def affine_matrix(params: AugmentationParams, width: int, height: int) -> np.ndarray:
    """Forward 3x3 pixel map of the composite transform."""
    ca, sa = math.cos(params.angle), math.sin(params.angle)
    rot = np.array([[ca, -sa], [sa, ca]])
    shear = np.array([[1.0, math.tan(params.shear_x)], [math.tan(params.shear_y), 1.0]])
    sc = np.array([[params.scale, 0.0], [0.0, params.scale]])
    flip = np.array([[-1.0, 0.0], [0.0, 1.0]]) if params.hflip else np.eye(2)
    lin = rot @ shear @ sc @ flip
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    m = np.eye(3)
    m[:2, :2] = lin
    center = np.array([cx, cy])
    m[:2, 2] = center + np.array([params.tx, params.ty]) - lin @ center
    return m


def _warp_plane(plane: np.ndarray, inv: np.ndarray, fill: int) -> np.ndarray:
    """Bilinear inverse-map resampling of one uint8 plane."""
    h, w = plane.shape
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    su = inv[0, 0] * us + inv[0, 1] * vs + inv[0, 2]
    sv = inv[1, 0] * us + inv[1, 1] * vs + inv[1, 2]
    u0 = np.floor(su).astype(np.int64)
    v0 = np.floor(sv).astype(np.int64)
    fu = su - u0
    fv = sv - v0

    def fetch(vv, uu):
        ok = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
        vals = plane[np.clip(vv, 0, h - 1), np.clip(uu, 0, w - 1)].astype(np.float64)
        return np.where(ok, vals, float(fill))

    out = (
        fetch(v0, u0) * (1 - fu) * (1 - fv)
        + fetch(v0, u0 + 1) * fu * (1 - fv)
        + fetch(v0 + 1, u0) * (1 - fu) * fv
        + fetch(v0 + 1, u0 + 1) * fu * fv
    )
    return np.rint(out).astype(np.uint8)


def warp_plane(plane: np.ndarray, params: AugmentationParams, fill: int) -> np.ndarray:
    """Apply the composite transform to a single plane."""
    h, w = plane.shape
    inv = np.linalg.inv(affine_matrix(params, w, h))
    return _warp_plane(np.asarray(plane, dtype=np.uint8), inv, fill)


def apply_geometric(frame: Frame4, params: AugmentationParams) -> Frame4:
    """Warp all four planes with the same composite affine.

    RGB planes fill with black outside the source; the scale plane fills
    with the no-ground sentinel.
    """
    inv = np.linalg.inv(affine_matrix(params, frame.width, frame.height))
    planes = np.empty_like(frame.planes)
    for i in range(3):
        planes[i] = _warp_plane(frame.planes[i], inv, RGB_FILL)
    planes[3] = _warp_plane(frame.planes[3], inv, S_FILL)
    return Frame4(planes)


def apply_color(frame: Frame4, params: AugmentationParams) -> Frame4:
    """Scale saturation and value of the RGB planes; plane 3 is untouched."""
    r, g, b = (frame.planes[i].astype(np.float64) for i in range(3))
    h, s, v = rgb_to_hsv(r, g, b)
    s = np.clip(s * params.sat_mult, 0.0, 1.0)
    v = np.clip(v * params.val_mult, 0.0, 1.0)
    r2, g2, b2 = hsv_to_rgb(h, s, v)
    planes = frame.planes.copy()
    planes[0] = np.rint(np.clip(r2, 0, 255)).astype(np.uint8)
    planes[1] = np.rint(np.clip(g2, 0, 255)).astype(np.uint8)
    planes[2] = np.rint(np.clip(b2, 0, 255)).astype(np.uint8)
    return Frame4(planes)


def transform_boxes(
    boxes: list[DetectionBox], params: AugmentationParams, width: int, height: int
) -> list[DetectionBox]:
    """Map each box's corners through the composite affine.

    The output is the clipped axis-aligned hull; boxes nearly pushed out
    of frame (visible area below 25% of the transformed hull) or shrunk
    below 4 px^2 are dropped.
    """
    m = affine_matrix(params, width, height)
    out = []
    for box in boxes:
        # Normalized coords span pixel corners; the affine lives in the
        # pixel-center frame, half a pixel to the left/up.
        px = np.array(
            [
                [box.x0 * width - 0.5, box.y0 * height - 0.5],
                [box.x1 * width - 0.5, box.y0 * height - 0.5],
                [box.x1 * width - 0.5, box.y1 * height - 0.5],
                [box.x0 * width - 0.5, box.y1 * height - 0.5],
            ]
        )
        mapped = px @ m[:2, :2].T + m[:2, 2] + 0.5
        x0, y0 = mapped.min(axis=0)
        x1, y1 = mapped.max(axis=0)
        hull_area = (x1 - x0) * (y1 - y0)
        cx0, cy0 = max(x0, 0.0), max(y0, 0.0)
        cx1, cy1 = min(x1, float(width)), min(y1, float(height))
        cw, ch = cx1 - cx0, cy1 - cy0
        if cw <= 0 or ch <= 0:
            continue
        clipped_area = cw * ch
        if clipped_area < MIN_BOX_AREA_PX or clipped_area < MIN_VISIBLE_FRACTION * hull_area:
            continue
        out.append(
            replace(
                box,
                cx=(cx0 + cx1) / 2.0 / width,
                cy=(cy0 + cy1) / 2.0 / height,
                w=cw / width,
                h=ch / height,
            )
        )
    return out


def augment(
    frame: Frame4,
    boxes: list[DetectionBox],
    ranges: AugmentationRanges,
    seed: int,
) -> tuple[Frame4, list[DetectionBox], AugmentationParams]:
    """Sample parameters and apply geometry then color, returning the
    parameters used so a run can be reproduced."""
    params = sample_params(ranges, frame.width, frame.height, seed)
    new_frame = apply_color(apply_geometric(frame, params), params)
    new_boxes = transform_boxes(boxes, params, frame.width, frame.height)
    return new_frame, new_boxes, params
