"""fieldscale: per-pixel ground-plane scale channels and a classic
distance-transform obstacle detector for calibrated tilted cameras."""

from .boxes import DetectionBox
from .classiccv import (
    HsvThresholds,
    ObstaclePoint,
    classify_obstacles,
    detect_obstacles,
    distance_transform,
    extract_cluster_boundaries,
    green_filter,
    morph_open_close,
    obstacles_to_boxes,
    rgb_to_hsv,
    threshold_by_line_width,
)
from .estimators import ClassicObstacleDetector, ScaleChannel
from .evaluation import EvalTable, MatchResult, average_precision, evaluate, iou, match_detections
from .frames import Frame4, fuse, split
from .geometry import (
    BehindCamera,
    CameraIntrinsics,
    CameraPose,
    CameraRig,
    GroundPoint,
    NoGroundIntersection,
    expected_line_width_px,
    ground_to_pixel,
    pixel_to_ground,
    pixel_to_ray,
    scale_at_pixel,
)
from .scalemap import ScaleEncoding, ScaleMap, build_scale_map, sample, to_channel
from .synth import LineSegment, Obstacle, SceneSpec, render

__version__ = "0.1.0"

__all__ = [
    "BehindCamera",
    "CameraIntrinsics",
    "CameraPose",
    "CameraRig",
    "ClassicObstacleDetector",
    "DetectionBox",
    "EvalTable",
    "Frame4",
    "GroundPoint",
    "HsvThresholds",
    "LineSegment",
    "MatchResult",
    "NoGroundIntersection",
    "Obstacle",
    "ObstaclePoint",
    "SceneSpec",
    "ScaleChannel",
    "ScaleEncoding",
    "ScaleMap",
    "average_precision",
    "build_scale_map",
    "classify_obstacles",
    "detect_obstacles",
    "distance_transform",
    "evaluate",
    "expected_line_width_px",
    "extract_cluster_boundaries",
    "fuse",
    "green_filter",
    "ground_to_pixel",
    "iou",
    "match_detections",
    "morph_open_close",
    "obstacles_to_boxes",
    "pixel_to_ground",
    "pixel_to_ray",
    "render",
    "rgb_to_hsv",
    "sample",
    "scale_at_pixel",
    "split",
    "threshold_by_line_width",
    "to_channel",
]
