import numpy as np
import pytest

from fieldscale.classiccv import HsvThresholds, detect_obstacles
from fieldscale.estimators import ClassicObstacleDetector, NotFittedError, ScaleChannel
from fieldscale.frames import fuse
from fieldscale.scalemap import ScaleEncoding, build_scale_map, to_channel
from fieldscale.synth import LineSegment, Obstacle, SceneSpec, render


def test_get_set_params(rig_pitch45):
    sc = ScaleChannel(rig=rig_pitch45, stride=16)
    params = sc.get_params()
    assert params["stride"] == 16 and params["rig"] is rig_pitch45
    sc.set_params(stride=8)
    assert sc.stride == 8
    with pytest.raises(ValueError):
        sc.set_params(bogus=1)


def test_scale_channel_requires_fit(rig_pitch45):
    sc = ScaleChannel(rig=rig_pitch45)
    with pytest.raises(NotFittedError):
        sc.transform(np.zeros((480, 640, 3), dtype=np.uint8))


def test_scale_channel_matches_library(rig_pitch45):
    rng = np.random.default_rng(1)
    image = rng.integers(0, 256, size=(480, 640, 3), dtype=np.uint8)
    frame = ScaleChannel(rig=rig_pitch45, stride=32).fit().transform(image)
    plane = to_channel(build_scale_map(rig_pitch45, 32), ScaleEncoding())
    expected = fuse(image, plane)
    assert (frame.planes == expected.planes).all()


def test_scale_channel_batch(rig_pitch45):
    rng = np.random.default_rng(2)
    images = [rng.integers(0, 256, size=(480, 640, 3), dtype=np.uint8) for _ in range(3)]
    frames = ScaleChannel(rig=rig_pitch45).fit().transform(images)
    assert len(frames) == 3
    assert all(f.width == 640 for f in frames)


def test_scale_channel_size_mismatch(rig_pitch45):
    sc = ScaleChannel(rig=rig_pitch45).fit()
    with pytest.raises(ValueError):
        sc.transform(np.zeros((100, 100, 3), dtype=np.uint8))


def test_detector_matches_library(rig_synth):
    scene = SceneSpec(
        rig=rig_synth,
        lines=(LineSegment(0.9, -2.0, 0.9, 2.0),),
        obstacles=(Obstacle(1.5, 0.0, 0.25, 0.3),),
    )
    image = render(scene).image
    det = ClassicObstacleDetector(rig=rig_synth).fit()
    boxes = det.predict(image)
    direct = detect_obstacles(image, rig_synth, HsvThresholds())
    assert boxes == direct.boxes
    assert len(boxes) == 1
    points = det.predict_points(image)
    assert points == direct.obstacle_points


def test_detector_batch(rig_synth):
    image = render(SceneSpec(rig=rig_synth)).image
    det = ClassicObstacleDetector(rig=rig_synth).fit()
    out = det.predict([image, image])
    assert out == [[], []]


def test_detector_repr_roundtrips_params(rig_synth):
    det = ClassicObstacleDetector(rig=rig_synth, margin=1.3)
    assert "margin=1.3" in repr(det)
