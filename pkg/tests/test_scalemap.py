import math

import numpy as np
import pytest

from fieldscale.geometry import horizon_distance_px, scale_at_pixel, scale_from_pixels
from fieldscale.scalemap import (
    SENTINEL,
    InvalidStride,
    OutOfBounds,
    ScaleEncoding,
    ScaleMap,
    build_scale_map,
    sample,
    sample_dense,
    to_channel,
)

from conftest import random_rig


def dense_exact(rig):
    """Per-pixel oracle: the exact scale field, sentinel where undefined."""
    intr = rig.intrinsics
    us, vs = np.meshgrid(
        np.arange(intr.width, dtype=float), np.arange(intr.height, dtype=float)
    )
    s = scale_from_pixels(rig, us, vs)
    return np.where(np.isfinite(s), s, SENTINEL)


def test_invalid_stride(rig_pitch45):
    with pytest.raises(InvalidStride):
        build_scale_map(rig_pitch45, 0)


def test_grid_dimensions(rig_pitch45):
    smap = build_scale_map(rig_pitch45, 32)
    assert smap.grid.shape == (480 // 32 + 1, 640 // 32 + 1)
    smap = build_scale_map(rig_pitch45, 33)
    assert smap.grid.shape == (math.ceil(480 / 33) + 1, math.ceil(640 / 33) + 1)


def test_nodes_equal_direct_calls(rig_pitch45):
    smap = build_scale_map(rig_pitch45, 32)
    for j in range(smap.grid.shape[0]):
        for i in range(smap.grid.shape[1]):
            u, v = i * 32.0, j * 32.0
            if math.isinf(smap.grid[j, i]):
                with pytest.raises(Exception):
                    scale_at_pixel(rig_pitch45, (u, v))
            else:
                assert smap.grid[j, i] == scale_at_pixel(rig_pitch45, (u, v))


def test_nadir_grid_constant(rig_nadir):
    smap = build_scale_map(rig_nadir, 32)
    assert np.allclose(smap.grid, 0.6 / 700.0, rtol=1e-9)


def test_sample_on_node_is_node_value(rig_pitch45):
    smap = build_scale_map(rig_pitch45, 32)
    assert sample(smap, (320.0, 352.0)) == smap.grid[11, 10]


def test_sample_constant_field_cell_center(rig_nadir):
    smap = build_scale_map(rig_nadir, 32)
    assert abs(sample(smap, (48.0, 48.0)) - 0.6 / 700.0) < 1e-15


def test_sample_out_of_bounds(rig_pitch45):
    smap = build_scale_map(rig_pitch45, 32)
    with pytest.raises(OutOfBounds):
        sample(smap, (640.0, 100.0))
    with pytest.raises(OutOfBounds):
        sample(smap, (-0.01, 100.0))


def test_sample_interior_close_to_exact(rig_pitch45):
    smap = build_scale_map(rig_pitch45, 32)
    exact = scale_at_pixel(rig_pitch45, (330.0, 303.0))
    got = sample(smap, (330.0, 303.0))
    assert abs(got - exact) / exact < 0.02


def test_sample_sentinel_when_any_node_is_sentinel(rig_shallow):
    smap = build_scale_map(rig_shallow, 32)
    sentinel_rows = np.nonzero(np.isinf(smap.grid).any(axis=1))[0]
    assert sentinel_rows.size > 0
    j = int(sentinel_rows.max())  # lowest grid row containing a sentinel node
    i = int(np.nonzero(np.isinf(smap.grid[j]))[0][0])
    px = (min(i * 32 + 1.0, smap.width - 1), min(j * 32 + 1.0, smap.height - 1))
    assert sample(smap, px) == SENTINEL


def test_interpolation_budget_on_random_rigs():
    rng = np.random.default_rng(5)
    for _ in range(3):
        rig = random_rig(rng, width=640, height=480)
        smap = build_scale_map(rig, 32)
        exact = dense_exact(rig)
        interp = sample_dense(smap)
        us, vs = np.meshgrid(np.arange(640, dtype=float), np.arange(480, dtype=float))
        depth = horizon_distance_px(rig, us, vs)
        sel = (depth >= 40.0) & np.isfinite(exact) & np.isfinite(interp)
        err = np.abs(interp[sel] - exact[sel]) / exact[sel]
        assert err.max() <= 0.02


def test_to_channel_constant_extremes():
    grid = np.full((4, 5), 0.001)
    smap = ScaleMap(stride=32, grid=grid, width=129, height=97)
    enc = ScaleEncoding(s_min=0.001, s_max=0.05)
    assert (to_channel(smap, enc) == 0).all()
    smap_hi = ScaleMap(stride=32, grid=np.full((4, 5), 0.05), width=129, height=97)
    assert (to_channel(smap_hi, enc) == 255).all()


def test_to_channel_sentinel_value(rig_shallow):
    smap = build_scale_map(rig_shallow, 32)
    enc = ScaleEncoding(sentinel_value=255)
    plane = to_channel(smap, enc)
    assert plane[0, 320] == 255  # top row is sky for a -15 degree pitch
    assert plane.shape == (480, 640)
    assert plane.dtype == np.uint8


def test_to_channel_monotone_in_scale():
    rng = np.random.default_rng(9)
    enc = ScaleEncoding()
    vals = np.sort(rng.uniform(0.0005, 0.08, size=64))
    smap = ScaleMap(stride=32, grid=np.tile(vals, (2, 1)), width=32 * 63 + 1, height=2)
    plane = to_channel(smap, enc)
    row = plane[0].astype(int)
    assert (np.diff(row) >= 0).all()


def test_to_channel_row_monotone_central_column(rig_pitch45):
    plane = to_channel(build_scale_map(rig_pitch45, 32), ScaleEncoding())
    col = plane[:, 320].astype(int)
    assert (np.diff(col) <= 0).all()


def test_channel_deterministic(rig_pitch45):
    a = to_channel(build_scale_map(rig_pitch45, 32), ScaleEncoding())
    b = to_channel(build_scale_map(rig_pitch45, 32), ScaleEncoding())
    assert (a == b).all()


def test_encoding_validation():
    with pytest.raises(ValueError):
        ScaleEncoding(s_min=0.0, s_max=0.05)
    with pytest.raises(ValueError):
        ScaleEncoding(s_min=0.05, s_max=0.05)
