"""Deterministic synthetic field scenes with exact ground truth.

Every pixel is ray-cast through the camera model: ground pixels take the
field or line color, obstacles render as camera-facing billboards of
known footprint and height.  Alongside the image the renderer returns the
projected ground-truth boxes, one coverage mask per entity, and the exact
dense scale field, which makes it the oracle for the detection, scale-map
and evaluation machinery.

Rendering is flat-shaded and point-sampled; entity edges are exact only
to the one-pixel rasterization margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import DetectionBox
from .geometry import (
    HORIZON_GUARD_PX,
    CameraRig,
    rays_from_pixels,
    scale_from_pixels,
)

FIELD_GREEN = (30, 140, 50)
LINE_WHITE = (255, 255, 255)
SKY_GRAY = (170, 170, 178)

OBSTACLE_CLASS_ID = 0


class NothingVisible(Exception):
    """The camera sees neither ground nor any obstacle."""


@dataclass(frozen=True)
class LineSegment:
    """A painted marking: ground segment with a physical stripe width."""

    x0: float
    y0: float
    x1: float
    y1: float
    width_m: float = 0.05

    def __post_init__(self):
        if self.width_m <= 0:
            raise ValueError("line width must be positive")


@dataclass(frozen=True)
class Obstacle:
    """Upright cylinder, rendered as a camera-facing billboard."""

    x: float
    y: float
    radius_m: float
    height_m: float
    color: tuple[int, int, int] = (40, 40, 40)
    class_id: int = OBSTACLE_CLASS_ID

    def __post_init__(self):
        if self.radius_m <= 0 or self.height_m <= 0:
            raise ValueError("obstacle size must be positive")
        if math.hypot(self.x, self.y) < 1e-6:
            raise ValueError("obstacle cannot sit at the camera position")


@dataclass(frozen=True)
class SceneSpec:
    """Field scene: rig, markings and obstacles on an open green plane.

    ``field_size`` records the nominal playing area (meters) for scene
    authorship; the ground plane itself renders green to the horizon.
    """

    rig: CameraRig
    lines: tuple[LineSegment, ...] = ()
    obstacles: tuple[Obstacle, ...] = ()
    field_size: tuple[float, float] = (6.0, 9.0)
    field_color: tuple[int, int, int] = FIELD_GREEN
    line_color: tuple[int, int, int] = LINE_WHITE
    sky_color: tuple[int, int, int] = SKY_GRAY


@dataclass(frozen=True)
class RenderResult:
    image: np.ndarray
    boxes: list[DetectionBox]
    line_masks: list[np.ndarray]
    obstacle_masks: list[np.ndarray]
    scale: np.ndarray
    ground_valid: np.ndarray


def _segment_distance(gx, gy, seg: LineSegment):
    ax, ay = seg.x0, seg.y0
    bx, by = seg.x1 - ax, seg.y1 - ay
    seg_len2 = bx * bx + by * by
    if seg_len2 == 0:
        return np.hypot(gx - ax, gy - ay)
    t = np.clip(((gx - ax) * bx + (gy - ay) * by) / seg_len2, 0.0, 1.0)
    return np.hypot(gx - (ax + t * bx), gy - (ay + t * by))


def render(spec: SceneSpec, guard_px: float = HORIZON_GUARD_PX) -> RenderResult:
    """Ray-cast the scene; deterministic for a given spec."""
    rig = spec.rig
    intr = rig.intrinsics
    w, h = intr.width, intr.height
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    dx, dy, dz, ok = rays_from_pixels(rig, us, vs)

    height = rig.pose.height
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = np.where(dz < 0, height / -dz, np.inf)
        scale = scale_from_pixels(rig, us, vs, guard_px=guard_px)
        ground_valid = ok & np.isfinite(scale)
        gx = np.where(ground_valid, t_ground * dx, np.nan)
        gy = np.where(ground_valid, t_ground * dy, np.nan)

    image = np.empty((h, w, 3), dtype=np.uint8)
    image[:] = spec.sky_color
    image[ground_valid] = spec.field_color

    line_masks = []
    for seg in spec.lines:
        with np.errstate(invalid="ignore"):
            on_line = ground_valid & (_segment_distance(gx, gy, seg) <= seg.width_m / 2.0)
        image[on_line] = spec.line_color
        line_masks.append(on_line)

    occluded = np.zeros((h, w), dtype=bool)

    # Billboards: vertical rectangles through each obstacle's axis, facing
    # the camera; nearest hit wins and occludes the ground behind it.
    t_best = np.where(ground_valid, t_ground, np.inf)
    obstacle_masks = [np.zeros((h, w), dtype=bool) for _ in spec.obstacles]
    owner = np.full((h, w), -1, dtype=np.int64)
    for idx, ob in enumerate(spec.obstacles):
        dist = math.hypot(ob.x, ob.y)
        nx, ny = -ob.x / dist, -ob.y / dist
        nd = nx * dx + ny * dy
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(nd < 0, -dist / nd, np.inf)
        px = t * dx
        py = t * dy
        pz = height + t * dz
        lat = -ny * (px - ob.x) + nx * (py - ob.y)
        hit = ok & np.isfinite(t) & (np.abs(lat) <= ob.radius_m) & (pz >= 0) & (pz <= ob.height_m)
        wins = hit & (t < t_best)
        t_best = np.where(wins, t, t_best)
        owner[wins] = idx
    for idx, ob in enumerate(spec.obstacles):
        mask = owner == idx
        obstacle_masks[idx] = mask
        occluded |= mask
        image[mask] = ob.color
    line_masks = [m & ~occluded for m in line_masks]

    boxes = []
    for idx, ob in enumerate(spec.obstacles):
        mask = obstacle_masks[idx]
        if not mask.any():
            continue
        vs_hit, us_hit = np.nonzero(mask)
        u0, u1 = us_hit.min(), us_hit.max() + 1
        v0, v1 = vs_hit.min(), vs_hit.max() + 1
        boxes.append(
            DetectionBox(
                class_id=ob.class_id,
                cx=(u0 + u1) / 2.0 / w,
                cy=(v0 + v1) / 2.0 / h,
                w=(u1 - u0) / w,
                h=(v1 - v0) / h,
                confidence=1.0,
            )
        )

    if not ground_valid.any() and not any(m.any() for m in obstacle_masks):
        raise NothingVisible("no ground or obstacle pixel in view")

    scale = np.where(np.isfinite(scale), scale, np.inf)
    return RenderResult(
        image=image,
        boxes=boxes,
        line_masks=line_masks,
        obstacle_masks=obstacle_masks,
        scale=scale,
        ground_valid=ground_valid,
    )


def read_scene(path) -> SceneSpec:
    """Scene description in the flat key-value family used for rigs.

    Besides the twelve rig keys: optional ``field_w_m``/``field_l_m``,
    ``field_color``/``line_color``/``sky_color`` (three 0-255 values), and
    numbered entities ``line.N = x0 y0 x1 y1 [width_m]`` and
    ``obstacle.N = x y radius_m height_m [r g b [class_id]]``.
    """
    from . import fileio

    kv = fileio.parse_keyvalues(path)
    rig_kv = {k: v for k, v in kv.items() if k in fileio._RIG_KEYS}
    rig = fileio.rig_from_keyvalues(rig_kv)

    def color_of(key, default):
        if key not in kv:
            return default
        vals = kv[key]
        if len(vals) != 3:
            raise fileio.BadUnit(f"{key}: expected three channel values")
        rgb = tuple(int(float(v)) for v in vals)
        if any(not 0 <= c <= 255 for c in rgb):
            raise fileio.BadUnit(f"{key}: channels must be 0..255")
        return rgb

    lines = []
    obstacles = []
    for key, vals in sorted(kv.items()):
        if key in fileio._RIG_KEYS or key.endswith("_color") or key in ("field_w_m", "field_l_m"):
            continue
        try:
            nums = [float(v) for v in vals]
        except ValueError as exc:
            raise fileio.BadUnit(f"{key}: {exc}") from exc
        if key.startswith("line."):
            if len(nums) not in (4, 5):
                raise fileio.BadUnit(f"{key}: expected x0 y0 x1 y1 [width_m]")
            width = nums[4] if len(nums) == 5 else 0.05
            lines.append(LineSegment(nums[0], nums[1], nums[2], nums[3], width))
        elif key.startswith("obstacle."):
            if len(nums) not in (4, 7, 8):
                raise fileio.BadUnit(f"{key}: expected x y radius_m height_m [r g b [class]]")
            color = tuple(int(c) for c in nums[4:7]) if len(nums) >= 7 else (40, 40, 40)
            cls = int(nums[7]) if len(nums) == 8 else OBSTACLE_CLASS_ID
            obstacles.append(Obstacle(nums[0], nums[1], nums[2], nums[3], color, cls))
        else:
            raise fileio.UnknownKey(key)

    field_w = float(kv["field_w_m"][0]) if "field_w_m" in kv else 6.0
    field_l = float(kv["field_l_m"][0]) if "field_l_m" in kv else 9.0
    return SceneSpec(
        rig=rig,
        lines=tuple(lines),
        obstacles=tuple(obstacles),
        field_size=(field_w, field_l),
        field_color=color_of("field_color", FIELD_GREEN),
        line_color=color_of("line_color", LINE_WHITE),
        sky_color=color_of("sky_color", SKY_GRAY),
    )
