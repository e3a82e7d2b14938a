"""Pinhole camera over a ground plane: rays, projections, per-pixel scale.

Conventions used throughout the package:

* Pixel coordinates are ``(u, v)`` with ``u`` along columns (right) and
  ``v`` along rows (down); pixel centers sit at integer coordinates, so a
  ``width x height`` image spans ``[0, width) x [0, height)``.
* The camera frame is the usual computer-vision one: x right, y down,
  z forward along the optical axis.
* The world (ground) frame has its origin on the ground directly beneath
  the optical center, x forward along the projected optical axis at zero
  yaw, y to the left, z up.  The ground plane is z = 0.
* Euler angles are applied extrinsically in the order yaw -> pitch -> roll
  (about the world z, y and x axes respectively).  Negative pitch tilts
  the optical axis toward the ground; with all angles zero the optical
  axis is horizontal along world +x.
* Radial distortion uses the two-term model on normalized image
  coordinates: ``(x, y) -> (x, y) * (1 + k1*r^2 + k2*r^4)``.

Rays that point at or above the horizon have no ground intersection.  A
guard band of ``HORIZON_GUARD_PX`` pixels below the analytic horizon line
(measured in undistorted pixel units) is treated the same way, since scale
values explode there.  Pixels whose radial distortion cannot be inverted
reliably (outside the model's invertible domain) are also treated as
having no ground intersection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HORIZON_GUARD_PX = 2.0

# Jacobians are estimated by central differences with this half-pixel step;
# small enough for projective curvature, large enough for float stability.
FD_STEP_PX = 0.5

_UNDISTORT_ITERS = 40
_UNDISTORT_TOL = 1e-12


class NoGroundIntersection(Exception):
    """The ray through a pixel does not hit the ground plane."""


class BehindCamera(Exception):
    """A world point projects behind the image plane."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with optional two-term radial distortion.

    Focal lengths and principal point are in pixels; ``k1``/``k2`` are
    dimensionless coefficients on normalized image coordinates.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def has_distortion(self) -> bool:
        return self.k1 != 0.0 or self.k2 != 0.0


@dataclass(frozen=True)
class CameraPose:
    """Camera placement over the ground plane.

    ``height`` is the optical center's elevation in meters; angles are in
    radians.  Negative pitch tilts the optical axis toward the ground.
    """

    height: float
    pitch: float = 0.0
    roll: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if self.height <= 0:
            raise ValueError("camera height must be positive")


@dataclass(frozen=True)
class CameraRig:
    """Intrinsics plus pose; the input to every geometric operation."""

    intrinsics: CameraIntrinsics
    pose: CameraPose


@dataclass(frozen=True)
class GroundPoint:
    """A point on the ground plane, meters in the world frame."""

    x: float
    y: float


def rotation_matrix(pose: CameraPose) -> np.ndarray:
    """Camera-to-world rotation for a pose (orthonormal 3x3).

    Composed as ``R_roll @ R_pitch @ R_yaw @ R0`` where R0 is the fixed
    axis permutation that sends the camera axes (right, down, forward) to
    world (-y, -z, +x): a zero-angle camera looks forward along world +x,
    parallel to the ground.
    """
    cy, sy = math.cos(pose.yaw), math.sin(pose.yaw)
    cp, sp = math.cos(pose.pitch), math.sin(pose.pitch)
    cr, sr = math.cos(pose.roll), math.sin(pose.roll)
    r_yaw = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    # Rotation about world y chosen so the forward axis gets elevation
    # `pitch`: (1,0,0) -> (cos p, 0, sin p).
    r_pitch = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    r_roll = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    r0 = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
    return r_roll @ r_pitch @ r_yaw @ r0


def _distort_normalized(intr: CameraIntrinsics, x, y):
    r2 = x * x + y * y
    f = 1.0 + intr.k1 * r2 + intr.k2 * r2 * r2
    return x * f, y * f


def _undistort_normalized(intr: CameraIntrinsics, xd, yd):
    """Invert the radial model on normalized coordinates.

    Newton iteration on the distorted radius (a fixed-point update),
    bisection-safeguarded, run to ``_UNDISTORT_TOL`` or ``_UNDISTORT_ITERS``.
    Returns ``(x, y, ok)`` where ``ok`` is False for points outside the
    model's invertible domain (no radius maps onto them).
    """
    xd = np.asarray(xd, dtype=np.float64)
    yd = np.asarray(yd, dtype=np.float64)
    if not intr.has_distortion:
        return xd.copy(), yd.copy(), np.ones(xd.shape, dtype=bool)

    k1, k2 = intr.k1, intr.k2
    rd = np.hypot(xd, yd)

    def forward(r):
        r2 = r * r
        return r * (1.0 + k1 * r2 + k2 * r2 * r2)

    # Bracket the root: forward(0)=0 <= rd; expand hi until forward(hi) >= rd.
    lo = np.zeros_like(rd)
    hi = np.maximum(rd, 1e-6)
    ok = np.ones(rd.shape, dtype=bool)
    for _ in range(60):
        under = forward(hi) < rd
        if not under.any():
            break
        hi = np.where(under, hi * 1.5, hi)
        ok &= hi < 1e6
    ok &= forward(hi) >= rd

    r = np.clip(rd, lo, hi)
    for _ in range(_UNDISTORT_ITERS):
        fr = forward(r) - rd
        lo = np.where(fr <= 0, r, lo)
        hi = np.where(fr > 0, r, hi)
        r2 = r * r
        dfr = 1.0 + 3.0 * k1 * r2 + 5.0 * k2 * r2 * r2
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dfr > 1e-12, fr / np.where(dfr > 1e-12, dfr, 1.0), 0.0)
        r_new = r - step
        # Fall back to bisection whenever Newton leaves the bracket.
        bad = (r_new <= lo) | (r_new >= hi) | ~np.isfinite(r_new)
        r = np.where(bad, 0.5 * (lo + hi), r_new)
    ok &= np.abs(forward(r) - rd) <= _UNDISTORT_TOL * np.maximum(1.0, rd)

    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(rd > 0, r / np.where(rd > 0, rd, 1.0), 1.0)
    return xd * scale, yd * scale, ok


def _normalized_coords(rig: CameraRig, u, v):
    """Undistorted normalized camera coordinates for pixels ``(u, v)``."""
    intr = rig.intrinsics
    xd = (np.asarray(u, dtype=np.float64) - intr.cx) / intr.fx
    yd = (np.asarray(v, dtype=np.float64) - intr.cy) / intr.fy
    return _undistort_normalized(intr, xd, yd)


def horizon_distance_px(rig: CameraRig, u, v):
    """Signed pixel distance below the analytic horizon line.

    Positive means the ray points below the horizon; +inf for rigs whose
    whole image sees the ground (nadir), -inf above it or where the
    distortion model cannot be inverted.  Measured in undistorted pixel
    units, which coincide with pixels when k1 = k2 = 0.
    """
    intr = rig.intrinsics
    xn, yn, ok = _normalized_coords(rig, u, v)
    r3 = rotation_matrix(rig.pose)[2]
    e = r3[0] * xn + r3[1] * yn + r3[2]
    grad = math.hypot(r3[0] / intr.fx, r3[1] / intr.fy)
    if grad < 1e-15:
        dist = np.where(e < 0, np.inf, -np.inf)
    else:
        dist = -e / grad
    return np.where(ok, dist, -np.inf)


def ground_from_pixels(rig: CameraRig, u, v, guard_px: float = HORIZON_GUARD_PX):
    """Vectorized pixel-to-ground projection.

    Returns ``(gx, gy)`` arrays broadcast from ``u``/``v``; entries are NaN
    where the ray misses the ground (at/above horizon, inside the guard
    band, or outside the distortion model's domain).
    """
    r = rotation_matrix(rig.pose)
    xn, yn, ok = _normalized_coords(rig, u, v)
    valid = ok & (horizon_distance_px(rig, u, v) > guard_px)

    dx = r[0, 0] * xn + r[0, 1] * yn + r[0, 2]
    dy = r[1, 0] * xn + r[1, 1] * yn + r[1, 2]
    dz = r[2, 0] * xn + r[2, 1] * yn + r[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = rig.pose.height / np.where(dz < 0, -dz, np.nan)
    gx = np.where(valid, t * dx, np.nan)
    gy = np.where(valid, t * dy, np.nan)
    return gx, gy


def rays_from_pixels(rig: CameraRig, u, v):
    """World-frame ray directions (not normalized) for pixel arrays.

    Returns ``(dx, dy, dz, ok)`` where ``ok`` marks pixels whose
    distortion inverted cleanly.
    """
    r = rotation_matrix(rig.pose)
    xn, yn, ok = _normalized_coords(rig, u, v)
    dx = r[0, 0] * xn + r[0, 1] * yn + r[0, 2]
    dy = r[1, 0] * xn + r[1, 1] * yn + r[1, 2]
    dz = r[2, 0] * xn + r[2, 1] * yn + r[2, 2]
    return dx, dy, dz, ok


def pixel_to_ray(rig: CameraRig, px) -> np.ndarray:
    """Unit direction in the world frame of the ray through a pixel."""
    u, v = float(px[0]), float(px[1])
    xn, yn, _ = _normalized_coords(rig, u, v)
    d = rotation_matrix(rig.pose) @ np.array([float(xn), float(yn), 1.0])
    return d / np.linalg.norm(d)


def pixel_to_ground(rig: CameraRig, px, guard_px: float = HORIZON_GUARD_PX) -> GroundPoint:
    """Ground-plane point seen by a pixel.

    Raises :class:`NoGroundIntersection` for pixels at/above the horizon
    or within the guard band below it.
    """
    gx, gy = ground_from_pixels(rig, float(px[0]), float(px[1]), guard_px=guard_px)
    if not np.isfinite(gx):
        raise NoGroundIntersection(f"pixel {px!r} sees no ground")
    return GroundPoint(float(gx), float(gy))


def project_point(rig: CameraRig, xyz) -> tuple[float, float]:
    """Project an arbitrary world point to pixel coordinates.

    Raises :class:`BehindCamera` when the point is not in front of the
    image plane.  Plumbing for the synthetic renderer and tests.
    """
    intr = rig.intrinsics
    r = rotation_matrix(rig.pose)
    c = np.array([0.0, 0.0, rig.pose.height])
    d_cam = r.T @ (np.asarray(xyz, dtype=np.float64) - c)
    if d_cam[2] <= 1e-12:
        raise BehindCamera(f"point {xyz!r} projects behind the camera")
    xn, yn = d_cam[0] / d_cam[2], d_cam[1] / d_cam[2]
    xd, yd = _distort_normalized(intr, xn, yn)
    return (intr.cx + intr.fx * float(xd), intr.cy + intr.fy * float(yd))


def ground_to_pixel(rig: CameraRig, gp: GroundPoint) -> tuple[float, float]:
    """Inverse of :func:`pixel_to_ground` for points on the ground plane."""
    return project_point(rig, (gp.x, gp.y, 0.0))


def _jacobian_from_pixels(rig: CameraRig, u, v, guard_px: float = HORIZON_GUARD_PX):
    """Central-difference Jacobian d(ground)/d(pixel) at each pixel.

    Returns the four entries ``(dxu, dxv, dyu, dyv)`` as arrays; NaN where
    the pixel or any probe has no ground intersection.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    s = FD_STEP_PX
    gxr, gyr = ground_from_pixels(rig, u + s, v, guard_px)
    gxl, gyl = ground_from_pixels(rig, u - s, v, guard_px)
    gxd, gyd = ground_from_pixels(rig, u, v + s, guard_px)
    gxu_, gyu_ = ground_from_pixels(rig, u, v - s, guard_px)
    inv = 1.0 / (2.0 * s)
    return (
        (gxr - gxl) * inv,
        (gxd - gxu_) * inv,
        (gyr - gyl) * inv,
        (gyd - gyu_) * inv,
    )


def scale_from_pixels(rig: CameraRig, u, v, guard_px: float = HORIZON_GUARD_PX):
    """Vectorized meters-per-pixel scale, NaN where undefined.

    The scalar scale is ``sqrt(|det J|)`` with J the pixel-to-ground
    Jacobian: the geometric mean of the two axis scales, isotropic and
    equal to height/focal for a nadir view.
    """
    dxu, dxv, dyu, dyv = _jacobian_from_pixels(rig, u, v, guard_px)
    det = dxu * dyv - dxv * dyu
    return np.sqrt(np.abs(det))


def sigma_min_from_pixels(rig: CameraRig, u, v, guard_px: float = HORIZON_GUARD_PX):
    """Smaller singular value of the pixel-to-ground Jacobian (m/px).

    This is the meters-per-pixel along the image direction where ground
    features spread over the most pixels, so ``width_m / sigma_min`` is the
    largest image thickness a ground stripe of that width can reach.
    """
    dxu, dxv, dyu, dyv = _jacobian_from_pixels(rig, u, v, guard_px)
    q = dxu * dxu + dxv * dxv + dyu * dyu + dyv * dyv
    det = dxu * dyv - dxv * dyu
    disc = np.sqrt(np.maximum(q * q - 4.0 * det * det, 0.0))
    return np.sqrt(np.maximum(q - disc, 0.0) / 2.0)


def scale_at_pixel(rig: CameraRig, px, guard_px: float = HORIZON_GUARD_PX) -> float:
    """Ground-plane scale (meters per pixel) at one pixel.

    Raises :class:`NoGroundIntersection` if the pixel or any of the four
    half-pixel finite-difference probes is at/above the horizon.
    """
    s = scale_from_pixels(rig, float(px[0]), float(px[1]), guard_px=guard_px)
    if not np.isfinite(s):
        raise NoGroundIntersection(f"pixel {px!r} has no defined scale")
    return float(s)


def expected_line_width_px(
    rig: CameraRig, px, line_width_m: float, guard_px: float = HORIZON_GUARD_PX
) -> float:
    """Widest image extent, in pixels, of a ground stripe ``line_width_m`` wide.

    Dividing by the smaller singular value of the pixel-to-ground Jacobian
    makes the result an upper bound over stripe orientations, so a marking
    line never measures thicker than this.
    """
    if line_width_m <= 0:
        raise ValueError("line width must be positive")
    sig = sigma_min_from_pixels(rig, float(px[0]), float(px[1]), guard_px=guard_px)
    if not np.isfinite(sig) or sig <= 0:
        raise NoGroundIntersection(f"pixel {px!r} has no defined line width")
    return float(line_width_m / sig)
