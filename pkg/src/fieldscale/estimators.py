"""Estimator-style front end: transformers and a predictor with the
familiar ``fit`` / ``transform`` / ``predict`` / ``get_params`` surface,
so the pipeline drops into scikit-learn style tooling without it being a
dependency.

Constructor arguments are stored verbatim (the get_params contract);
``fit`` validates and precomputes, and the work happens in ``transform``
or ``predict``.  Inputs may be a single image or a sequence of images.
"""

from __future__ import annotations

import inspect

from .classiccv import HsvThresholds, detect_obstacles
from .frames import fuse
from .geometry import GroundPoint
from .scalemap import ScaleEncoding, build_scale_map, to_channel
from .validation import check_rgb_image, check_rig, is_image_batch


class NotFittedError(RuntimeError):
    pass


class ParamsMixin:
    """get_params/set_params over the constructor signature."""

    @classmethod
    def _param_names(cls):
        sig = inspect.signature(cls.__init__)
        return [name for name in sig.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params):
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"unknown parameter {name!r} for {type(self).__name__}")
            setattr(self, name, value)
        return self

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class ScaleChannel(ParamsMixin):
    """Transformer that appends the encoded scale plane to RGB images.

    The coarse grid and the encoded plane depend only on the rig, so
    ``fit`` computes them once and ``transform`` fuses them with each
    image.
    """

    def __init__(self, rig=None, stride=32, s_min=0.001, s_max=0.05, sentinel_value=255):
        self.rig = rig
        self.stride = stride
        self.s_min = s_min
        self.s_max = s_max
        self.sentinel_value = sentinel_value

    def fit(self, X=None, y=None):
        rig = check_rig(self.rig)
        self.scale_map_ = build_scale_map(rig, self.stride)
        enc = ScaleEncoding(self.s_min, self.s_max, self.sentinel_value)
        self.plane_ = to_channel(self.scale_map_, enc)
        return self

    def transform(self, X):
        if not hasattr(self, "plane_"):
            raise NotFittedError("call fit() before transform()")
        if is_image_batch(X):
            return [self._one(img) for img in X]
        return self._one(X)

    def fit_transform(self, X, y=None):
        return self.fit(X, y).transform(X)

    def _one(self, image):
        image = check_rgb_image(image)
        if image.shape[:2] != self.plane_.shape:
            raise ValueError(
                f"image {image.shape[:2]} does not match the rig's "
                f"{self.plane_.shape} sensor size"
            )
        return fuse(image, self.plane_)


class ClassicObstacleDetector(ParamsMixin):
    """Green-filter / distance-transform obstacle detector.

    ``predict`` maps an RGB image (or a sequence of them) to detection
    boxes; ``predict_points`` returns the range-gated ground contacts.
    """

    def __init__(
        self,
        rig=None,
        thresholds=None,
        kernel_radius=1,
        iterations=1,
        line_width_m=0.05,
        margin=1.1,
        max_range_m=1.0,
        query_x=0.0,
        query_y=0.0,
    ):
        self.rig = rig
        self.thresholds = thresholds
        self.kernel_radius = kernel_radius
        self.iterations = iterations
        self.line_width_m = line_width_m
        self.margin = margin
        self.max_range_m = max_range_m
        self.query_x = query_x
        self.query_y = query_y

    def fit(self, X=None, y=None):
        check_rig(self.rig)
        self.thresholds_ = self.thresholds or HsvThresholds()
        return self

    def pipeline(self, image):
        """Full pipeline products for one image."""
        if not hasattr(self, "thresholds_"):
            self.fit()
        return detect_obstacles(
            check_rgb_image(image),
            self.rig,
            self.thresholds_,
            kernel_radius=self.kernel_radius,
            iterations=self.iterations,
            line_width_m=self.line_width_m,
            margin=self.margin,
            query=GroundPoint(self.query_x, self.query_y),
            max_range_m=self.max_range_m,
        )

    def predict(self, X):
        if is_image_batch(X):
            return [self.pipeline(img).boxes for img in X]
        return self.pipeline(X).boxes

    def predict_points(self, X):
        if is_image_batch(X):
            return [self.pipeline(img).obstacle_points for img in X]
        return self.pipeline(X).obstacle_points
