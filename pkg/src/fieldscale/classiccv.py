"""Classic obstacle detection over a green field.

The stages, in pipeline order: HSV green filter, morphological opening,
exact Euclidean distance transform, per-pixel line-width thresholding
against the camera geometry, contour extraction of the surviving clusters,
and range-gated classification of contour points projected to the ground.

Binary masks are boolean ``(H, W)`` arrays with ``True`` meaning
"obstacle candidate" (not green).  Distance maps hold the distance from
each candidate pixel to the nearest green pixel, so thin markings never
exceed half their expected width.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .boxes import DetectionBox
from .geometry import (
    HORIZON_GUARD_PX,
    CameraRig,
    GroundPoint,
    ground_from_pixels,
    sigma_min_from_pixels,
)

OBSTACLE_CLASS_ID = 0


class DegenerateMaskWarning(UserWarning):
    """Distance transform input had only one pixel class."""


@dataclass(frozen=True)
class HsvThresholds:
    """Inclusive HSV ranges that define "green".

    Hue is in degrees and may wrap (``h_lo > h_hi`` selects the range
    through 0); saturation and value are fractions.
    """

    h_lo: float = 80.0
    h_hi: float = 160.0
    s_lo: float = 0.25
    s_hi: float = 1.0
    v_lo: float = 0.15
    v_hi: float = 1.0

    def __post_init__(self):
        if not (0 <= self.h_lo < 360 and 0 <= self.h_hi < 360):
            raise ValueError("hue bounds must lie in [0, 360)")
        if self.s_lo > self.s_hi or self.v_lo > self.v_hi:
            raise ValueError("saturation/value ranges must be ordered")


@dataclass(frozen=True)
class ObstaclePoint:
    """A contour pixel confirmed as an obstacle within range."""

    px: tuple[float, float]
    ground: GroundPoint
    range_m: float


def rgb_to_hsv(r, g, b):
    """Hexcone RGB -> HSV; channels in 0..255, h in [0,360), s/v in [0,1].

    Accepts scalars or broadcastable arrays.
    """
    r = np.asarray(r, dtype=np.float64) / 255.0
    g = np.asarray(g, dtype=np.float64) / 255.0
    b = np.asarray(b, dtype=np.float64) / 255.0
    v = np.maximum(np.maximum(r, g), b)
    lo = np.minimum(np.minimum(r, g), b)
    delta = v - lo
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)
        dsafe = np.where(delta > 0, delta, 1.0)
        h = np.where(
            v == r,
            (g - b) / dsafe,
            np.where(v == g, 2.0 + (b - r) / dsafe, 4.0 + (r - g) / dsafe),
        )
    h = np.where(delta > 0, (h * 60.0) % 360.0, 0.0)
    if h.ndim == 0:
        return float(h), float(s), float(v)
    return h, s, v


def hsv_to_rgb(h, s, v):
    """Inverse hexcone conversion back to float channels in 0..255."""
    h = np.asarray(h, dtype=np.float64) % 360.0
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    z = np.zeros_like(c)
    sector = np.floor(hp).astype(int) % 6
    r1 = np.choose(sector, [c, x, z, z, x, c])
    g1 = np.choose(sector, [x, c, c, x, z, z])
    b1 = np.choose(sector, [z, z, x, c, c, x])
    m = v - c
    return (r1 + m) * 255.0, (g1 + m) * 255.0, (b1 + m) * 255.0


def green_filter(image: np.ndarray, th: HsvThresholds = HsvThresholds()) -> np.ndarray:
    """Mask of obstacle-candidate pixels: True wherever a pixel is not green."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.size == 0:
        raise ValueError("image must be a non-empty (H, W, 3) array")
    h, s, v = rgb_to_hsv(image[:, :, 0], image[:, :, 1], image[:, :, 2])
    if th.h_lo <= th.h_hi:
        h_in = (h >= th.h_lo) & (h <= th.h_hi)
    else:
        h_in = (h >= th.h_lo) | (h <= th.h_hi)
    green = h_in & (s >= th.s_lo) & (s <= th.s_hi) & (v >= th.v_lo) & (v <= th.v_hi)
    return ~green


def _min_filter_1d(arr: np.ndarray, radius: int, axis: int) -> np.ndarray:
    out = arr.copy()
    for off in range(1, radius + 1):
        shifted = np.roll(arr, off, axis=axis)
        if axis == 0:
            shifted[:off] = True
        else:
            shifted[:, :off] = True
        out &= shifted
        shifted = np.roll(arr, -off, axis=axis)
        if axis == 0:
            shifted[-off:] = True
        else:
            shifted[:, -off:] = True
        out &= shifted
    return out


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion by a (2r+1) square; pixels beyond the border count as 0."""
    padded_true = _min_filter_1d(mask, radius, axis=0)
    padded_true = _min_filter_1d(padded_true, radius, axis=1)
    # The separable min-filter above padded with True; border pixels must
    # erode against the implicit 0 outside the image.
    out = padded_true.copy()
    out[:radius] = False
    out[-radius:] = False
    out[:, :radius] = False
    out[:, -radius:] = False
    return out


def _max_filter_1d(arr: np.ndarray, radius: int, axis: int) -> np.ndarray:
    out = arr.copy()
    for off in range(1, radius + 1):
        shifted = np.roll(arr, off, axis=axis)
        if axis == 0:
            shifted[:off] = False
        else:
            shifted[:, :off] = False
        out |= shifted
        shifted = np.roll(arr, -off, axis=axis)
        if axis == 0:
            shifted[-off:] = False
        else:
            shifted[:, -off:] = False
        out |= shifted
    return out


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation by a (2r+1) square; the outside counts as 0."""
    out = _max_filter_1d(mask, radius, axis=0)
    return _max_filter_1d(out, radius, axis=1)


def morph_open_close(mask: np.ndarray, kernel_radius: int = 1, iterations: int = 1) -> np.ndarray:
    """Morphological opening (erosion then dilation), repeated.

    Removes isolated candidate specks smaller than the structuring
    element while leaving large solids untouched.
    """
    if kernel_radius < 1:
        raise ValueError("kernel_radius must be >= 1")
    out = np.asarray(mask, dtype=bool)
    for _ in range(iterations):
        out = dilate(erode(out, kernel_radius), kernel_radius)
    return out


_FAR = 1 << 20  # farther than any image diagonal; squares still fit int64


def _envelope_1d(f: np.ndarray) -> np.ndarray:
    """Lower envelope of parabolas x -> f[j] + (x-j)^2 over one row."""
    n = f.shape[0]
    out = np.empty(n, dtype=np.int64)
    v = np.empty(n, dtype=np.int64)  # parabola sites
    z = np.empty(n + 1, dtype=np.float64)  # boundaries between parabolas
    k = 0
    v[0] = 0
    z[0] = -math.inf
    z[1] = math.inf
    for q in range(1, n):
        fq = f[q] + q * q
        while True:
            p = v[k]
            s = (fq - (f[p] + p * p)) / (2 * q - 2 * p)
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = math.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        p = v[k]
        out[q] = (q - p) * (q - p) + f[p]
    return out


def distance_transform_squared(mask: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance from each candidate to the nearest
    green pixel, via the two-pass separable parabolic-envelope algorithm.

    Degenerate masks (a single pixel class) return an all-zero or
    all-``_FAR``-squared map and raise :class:`DegenerateMaskWarning`.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if not mask.any():
        warnings.warn("mask has no candidate pixels", DegenerateMaskWarning, stacklevel=2)
        return np.zeros((h, w), dtype=np.int64)
    if mask.all():
        warnings.warn("mask has no green pixels", DegenerateMaskWarning, stacklevel=2)
        return np.full((h, w), np.int64(_FAR) * _FAR, dtype=np.int64)

    # Pass 1: per-column distance (in rows) to the nearest zero pixel.
    g = np.full((h, w), _FAR, dtype=np.int64)
    g[~mask] = 0
    for i in range(1, h):
        np.minimum(g[i], g[i - 1] + 1, out=g[i])
    for i in range(h - 2, -1, -1):
        np.minimum(g[i], g[i + 1] + 1, out=g[i])

    # Pass 2: per-row lower envelope over squared column distances.
    out = np.empty((h, w), dtype=np.int64)
    g2 = g * g
    for i in range(h):
        out[i] = _envelope_1d(g2[i])
    return out


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance map in pixels (float); see the squared variant."""
    return np.sqrt(distance_transform_squared(mask).astype(np.float64))


def threshold_by_line_width(
    dmap: np.ndarray,
    rig: CameraRig,
    line_width_m: float = 0.05,
    margin: float = 1.1,
    guard_px: float = HORIZON_GUARD_PX,
) -> np.ndarray:
    """Keep only pixels deeper inside a candidate region than any marking
    line could reach: distance above ``margin * expected_width / 2``.

    Pixels with no ground intersection (at/above the horizon) are never
    obstacle cores.
    """
    if margin < 1.0:
        raise ValueError("margin must be >= 1")
    dmap = np.asarray(dmap, dtype=np.float64)
    h, w = dmap.shape
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    sigma = sigma_min_from_pixels(rig, us, vs, guard_px=guard_px)
    with np.errstate(invalid="ignore", divide="ignore"):
        expected = line_width_m / sigma
        core = dmap > margin * expected / 2.0
    return core & np.isfinite(expected) & np.isfinite(dmap)


_MOORE = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


def _label_components(mask: np.ndarray) -> list[np.ndarray]:
    """8-connected components as arrays of (v, u) pixel indices, each in
    scan order (top-left-most pixel first)."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    components = []
    for v0, u0 in np.argwhere(mask):
        if seen[v0, u0]:
            continue
        stack = [(v0, u0)]
        seen[v0, u0] = True
        pixels = []
        while stack:
            v, u = stack.pop()
            pixels.append((v, u))
            for du, dv in _MOORE:
                nv, nu = v + dv, u + du
                if 0 <= nv < h and 0 <= nu < w and mask[nv, nu] and not seen[nv, nu]:
                    seen[nv, nu] = True
                    stack.append((nv, nu))
        pixels.sort()
        components.append(np.array(pixels, dtype=np.intp))
    return components


def _trace_moore(mask: np.ndarray, start_vu: tuple[int, int]) -> np.ndarray:
    """Clockwise Moore-neighbor border following from the top-left-most
    pixel, stopping when the start is re-entered the same way."""
    h, w = mask.shape

    def inside(v, u):
        return 0 <= v < h and 0 <= u < w and mask[v, u]

    v0, u0 = start_vu
    contour = [(u0, v0)]
    # Entered the start pixel as if scanning from its (outside) west
    # neighbor, so begin the clockwise sweep just after west.
    backtrack = 4  # index of (-1, 0) in _MOORE
    cur = (v0, u0)
    first_move = None
    while True:
        found = None
        for i in range(1, 9):
            idx = (backtrack + i) % 8
            du, dv = _MOORE[idx]
            if inside(cur[0] + dv, cur[1] + du):
                found = idx
                break
        if found is None:
            break  # isolated pixel
        nxt = (cur[0] + _MOORE[found][1], cur[1] + _MOORE[found][0])
        if first_move is None:
            first_move = found
            stop_state = (cur, found)
        elif (cur, found) == stop_state:
            contour.pop()  # the re-entry duplicated the start pixel
            break
        cur = nxt
        contour.append((cur[1], cur[0]))
        # Next sweep starts from the neighbor opposite the arrival move,
        # rotated one step back (the pixel we came from, seen from `cur`).
        backtrack = (found + 4) % 8
    return np.array(contour, dtype=np.intp)


def extract_cluster_boundaries(core: np.ndarray) -> list[np.ndarray]:
    """Outer contour of every 8-connected component.

    Each contour is an (L, 2) array of (u, v) pixels in clockwise order
    starting at the component's top-left-most pixel; thin components may
    list a pixel twice (once per side of the walk).
    """
    core = np.asarray(core, dtype=bool)
    contours = []
    for comp in _label_components(core):
        v0, u0 = comp[0]
        contours.append(_trace_moore(core, (int(v0), int(u0))))
    return contours


def classify_obstacles(
    contours: list[np.ndarray],
    rig: CameraRig,
    query: GroundPoint = GroundPoint(0.0, 0.0),
    max_range_m: float = 1.0,
    guard_px: float = HORIZON_GUARD_PX,
) -> list[ObstaclePoint]:
    """Project contour pixels to the ground and keep those within range of
    the query position; pixels without a ground intersection are skipped."""
    if max_range_m <= 0:
        raise ValueError("max_range_m must be positive")
    points = []
    for contour in contours:
        if len(contour) == 0:
            continue
        u = contour[:, 0].astype(np.float64)
        v = contour[:, 1].astype(np.float64)
        gx, gy = ground_from_pixels(rig, u, v, guard_px=guard_px)
        rng = np.hypot(gx - query.x, gy - query.y)
        keep = np.isfinite(rng) & (rng <= max_range_m)
        for i in np.flatnonzero(keep):
            points.append(
                ObstaclePoint(
                    px=(float(u[i]), float(v[i])),
                    ground=GroundPoint(float(gx[i]), float(gy[i])),
                    range_m=float(rng[i]),
                )
            )
    return points


def obstacles_to_boxes(core: np.ndarray) -> list[DetectionBox]:
    """Axis-aligned box per 8-connected core component, in normalized
    coordinates with class ``OBSTACLE_CLASS_ID`` and confidence 1."""
    core = np.asarray(core, dtype=bool)
    h, w = core.shape
    out = []
    for comp in _label_components(core):
        vs, us = comp[:, 0], comp[:, 1]
        u0, u1 = us.min(), us.max() + 1
        v0, v1 = vs.min(), vs.max() + 1
        out.append(
            DetectionBox(
                class_id=OBSTACLE_CLASS_ID,
                cx=(u0 + u1) / 2.0 / w,
                cy=(v0 + v1) / 2.0 / h,
                w=(u1 - u0) / w,
                h=(v1 - v0) / h,
                confidence=1.0,
            )
        )
    return out


@dataclass(frozen=True)
class PipelineResult:
    """Intermediate and final products of one detector run."""

    candidate_mask: np.ndarray
    opened_mask: np.ndarray
    distance_map: np.ndarray
    core: np.ndarray
    contours: list[np.ndarray]
    obstacle_points: list[ObstaclePoint]
    boxes: list[DetectionBox]


def detect_obstacles(
    image: np.ndarray,
    rig: CameraRig,
    thresholds: HsvThresholds = HsvThresholds(),
    kernel_radius: int = 1,
    iterations: int = 1,
    line_width_m: float = 0.05,
    margin: float = 1.1,
    query: GroundPoint = GroundPoint(0.0, 0.0),
    max_range_m: float = 1.0,
    guard_px: float = HORIZON_GUARD_PX,
) -> PipelineResult:
    """Run the full classic pipeline on an RGB image."""
    mask = green_filter(image, thresholds)
    opened = morph_open_close(mask, kernel_radius, iterations)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateMaskWarning)
        dmap = distance_transform(opened)
    core = threshold_by_line_width(dmap, rig, line_width_m, margin, guard_px=guard_px)
    contours = extract_cluster_boundaries(core)
    points = classify_obstacles(contours, rig, query, max_range_m, guard_px=guard_px)
    return PipelineResult(
        candidate_mask=mask,
        opened_mask=opened,
        distance_map=dmap,
        core=core,
        contours=contours,
        obstacle_points=points,
        boxes=obstacles_to_boxes(core),
    )

