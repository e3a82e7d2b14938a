"""The detection-box geometry shared by ground truth, predictions and the
classic pipeline's output: normalized center/size plus class and confidence."""

from __future__ import annotations

from dataclasses import dataclass

_EPS = 1e-9


@dataclass(frozen=True)
class DetectionBox:
    """Axis-aligned box in normalized image coordinates.

    ``cx, cy`` are the center and ``w, h`` the full extents, all as
    fractions of the image size.  Ground-truth boxes carry confidence 1.0.
    """

    class_id: int
    cx: float
    cy: float
    w: float
    h: float
    confidence: float = 1.0

    def validate(self) -> None:
        """Raise ValueError unless the box sits inside the unit square."""
        if self.class_id < 0:
            raise ValueError("class_id must be non-negative")
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box extents must be positive")
        for edge in (
            self.cx - self.w / 2,
            self.cx + self.w / 2,
            self.cy - self.h / 2,
            self.cy + self.h / 2,
        ):
            if not -_EPS <= edge <= 1.0 + _EPS:
                raise ValueError(f"box edge {edge} outside the unit square")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")

    @property
    def x0(self) -> float:
        return self.cx - self.w / 2

    @property
    def x1(self) -> float:
        return self.cx + self.w / 2

    @property
    def y0(self) -> float:
        return self.cy - self.h / 2

    @property
    def y1(self) -> float:
        return self.cy + self.h / 2

    @property
    def area(self) -> float:
        return self.w * self.h
