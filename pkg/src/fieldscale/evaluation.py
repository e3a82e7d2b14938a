"""Detection scoring: IoU, greedy matching, per-class average precision
and the mAP summary over IoU thresholds 0.5 through 0.9.

The protocol is the VOC-style one: predictions ranked by confidence
globally per class (ties broken by input order), each matched greedily to
its best-overlapping unmatched same-class ground truth within the image,
and AP integrated over the full precision-recall staircase (all-point
interpolation).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .boxes import DetectionBox

DEFAULT_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


class NoGroundTruth(Exception):
    """Requested a class with no ground-truth instances."""


class EmptyGroundTruth(Exception):
    """Evaluation over a dataset with no ground truth at all."""


@dataclass(frozen=True)
class MatchResult:
    """Per-prediction TP/FP flags at one IoU threshold.

    Rows are sorted by descending confidence (input order on ties);
    ``gt_counts`` holds the number of ground-truth boxes per class.
    """

    class_ids: np.ndarray
    confidences: np.ndarray
    is_tp: np.ndarray
    gt_counts: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class EvalTable:
    """Per-class AP and mAP for each IoU threshold row."""

    thresholds: tuple[float, ...]
    class_ids: tuple[int, ...]
    ap: dict[float, dict[int, float]]
    mean_ap: dict[float, float]

    def to_text(self, class_names: Mapping[int, str] | None = None) -> str:
        names = {c: (class_names or {}).get(c, f"class{c}") for c in self.class_ids}
        header = ["", *(names[c] for c in self.class_ids), "mAP"]
        rows = [header]
        for t in self.thresholds:
            rows.append(
                [f"mAP@{t:g}", *(f"{self.ap[t][c]:.3f}" for c in self.class_ids), f"{self.mean_ap[t]:.3f}"]
            )
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows)

    def to_csv(self) -> str:
        lines = ["threshold," + ",".join(f"ap_class{c}" for c in self.class_ids) + ",map"]
        for t in self.thresholds:
            cells = [f"{t:g}"] + [f"{self.ap[t][c]:.6f}" for c in self.class_ids] + [f"{self.mean_ap[t]:.6f}"]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def iou(a: DetectionBox, b: DetectionBox) -> float:
    """Intersection over union of two boxes; symmetric, in [0, 1]."""
    ix = max(0.0, min(a.x1, b.x1) - max(a.x0, b.x0))
    iy = max(0.0, min(a.y1, b.y1) - max(a.y0, b.y0))
    inter = ix * iy
    # Areas from the same edge differences as the intersection, so
    # identical boxes land on exactly 1.0.
    area_a = (a.x1 - a.x0) * (a.y1 - a.y0)
    area_b = (b.x1 - b.x0) * (b.y1 - b.y0)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return float(min(1.0, max(0.0, inter / union)))


def match_detections(
    preds: Sequence[DetectionBox],
    gts: Sequence[DetectionBox],
    threshold: float,
) -> MatchResult:
    """Greedy confidence-ordered matching within one image.

    A prediction is a true positive iff its best-IoU unmatched same-class
    ground truth reaches the threshold; that ground truth is then consumed,
    so duplicates of one object count as false positives.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    gt_used = [False] * len(gts)
    class_ids = np.empty(len(preds), dtype=np.int64)
    confidences = np.empty(len(preds), dtype=np.float64)
    is_tp = np.zeros(len(preds), dtype=bool)
    for row, i in enumerate(order):
        p = preds[i]
        class_ids[row] = p.class_id
        confidences[row] = p.confidence
        best_j, best_iou = -1, 0.0
        for j, g in enumerate(gts):
            if gt_used[j] or g.class_id != p.class_id:
                continue
            ov = iou(p, g)
            if ov > best_iou:
                best_j, best_iou = j, ov
        if best_j >= 0 and best_iou >= threshold:
            gt_used[best_j] = True
            is_tp[row] = True
    gt_counts: dict[int, int] = {}
    for g in gts:
        gt_counts[g.class_id] = gt_counts.get(g.class_id, 0) + 1
    return MatchResult(class_ids=class_ids, confidences=confidences, is_tp=is_tp, gt_counts=gt_counts)


def average_precision(match: MatchResult, class_id: int | None = None) -> float:
    """All-point interpolated AP for one class of a match result.

    ``class_id`` may be omitted when the result contains a single class.
    Raises :class:`NoGroundTruth` for classes absent from the ground truth.
    """
    if class_id is None:
        present = set(match.gt_counts) | set(int(c) for c in match.class_ids)
        if len(present) != 1:
            raise ValueError("class_id is required for multi-class results")
        class_id = present.pop()
    n_gt = match.gt_counts.get(class_id, 0)
    if n_gt == 0:
        raise NoGroundTruth(f"no ground truth for class {class_id}")
    sel = match.class_ids == class_id
    tp = match.is_tp[sel].astype(np.float64)
    if tp.size == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(1.0 - tp)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    # Interpolated precision: running maximum from the high-recall end.
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for r, p in zip(recall, interp):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def _pooled_match(
    preds_by_image: Mapping[str, Sequence[DetectionBox]],
    gts_by_image: Mapping[str, Sequence[DetectionBox]],
    threshold: float,
    keys: Sequence[str],
) -> MatchResult:
    rows = []  # (confidence, image_rank, input_rank, class_id, is_tp)
    gt_counts: dict[int, int] = {}
    for rank, key in enumerate(keys):
        preds = preds_by_image.get(key, [])
        gts = gts_by_image.get(key, [])
        m = match_detections(preds, gts, threshold)
        order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
        for row, i in enumerate(order):
            rows.append((preds[i].confidence, rank, i, preds[i].class_id, bool(m.is_tp[row])))
        for c, n in m.gt_counts.items():
            gt_counts[c] = gt_counts.get(c, 0) + n
    rows.sort(key=lambda r: (-r[0], r[1], r[2]))
    return MatchResult(
        class_ids=np.array([r[3] for r in rows], dtype=np.int64),
        confidences=np.array([r[0] for r in rows], dtype=np.float64),
        is_tp=np.array([r[4] for r in rows], dtype=bool),
        gt_counts=gt_counts,
    )


def evaluate(
    preds_by_image: Mapping[str, Sequence[DetectionBox]],
    gts_by_image: Mapping[str, Sequence[DetectionBox]],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> EvalTable:
    """Pool detections over a dataset and score every (class, threshold).

    Classes are taken from the ground truth; predictions for classes never
    seen in the ground truth are ignored.
    """
    keys = sorted(gts_by_image.keys() | preds_by_image.keys())
    class_ids = sorted({g.class_id for gts in gts_by_image.values() for g in gts})
    if not class_ids:
        raise EmptyGroundTruth("no ground-truth boxes in the dataset")
    ap: dict[float, dict[int, float]] = {}
    mean_ap: dict[float, float] = {}
    for t in thresholds:
        pooled = _pooled_match(preds_by_image, gts_by_image, t, keys)
        per_class = {c: average_precision(pooled, c) for c in class_ids}
        ap[t] = per_class
        mean_ap[t] = float(np.mean(list(per_class.values())))
    return EvalTable(
        thresholds=tuple(thresholds),
        class_ids=tuple(class_ids),
        ap=ap,
        mean_ap=mean_ap,
    )
