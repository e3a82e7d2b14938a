import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldscale.boxes import DetectionBox
from fieldscale.evaluation import (
    DEFAULT_THRESHOLDS,
    EmptyGroundTruth,
    MatchResult,
    NoGroundTruth,
    average_precision,
    evaluate,
    iou,
    match_detections,
)


def box(cx, cy, w, h, cls=0, conf=1.0):
    return DetectionBox(cls, cx, cy, w, h, conf)


# ------------------------------------------------------------------ iou


def test_iou_identical():
    b = box(0.5, 0.5, 0.4, 0.4)
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou(box(0.2, 0.2, 0.2, 0.2), box(0.8, 0.8, 0.2, 0.2)) == 0.0


def test_iou_analytic_third():
    a = box(0.25, 0.25, 0.5, 0.5)
    b = box(0.5, 0.25, 0.5, 0.5)
    assert abs(iou(a, b) - 1.0 / 3.0) < 1e-12


@given(
    st.tuples(
        st.floats(0.2, 0.8), st.floats(0.2, 0.8), st.floats(0.05, 0.4), st.floats(0.05, 0.4)
    ),
    st.tuples(
        st.floats(0.2, 0.8), st.floats(0.2, 0.8), st.floats(0.05, 0.4), st.floats(0.05, 0.4)
    ),
)
@settings(max_examples=200, deadline=None)
def test_iou_symmetric_and_bounded(p, q):
    a, b = box(*p), box(*q)
    assert abs(iou(a, b) - iou(b, a)) < 1e-12
    assert 0.0 <= iou(a, b) <= 1.0


# ------------------------------------------------------------- matching


def test_single_match_tp():
    gt = [box(0.5, 0.5, 0.2, 0.2)]
    pred = [box(0.52, 0.5, 0.2, 0.2, conf=0.9)]
    assert iou(pred[0], gt[0]) > 0.5
    m = match_detections(pred, gt, 0.5)
    assert m.is_tp.tolist() == [True]


def test_greedy_by_confidence():
    gt = [box(0.5, 0.5, 0.2, 0.2)]
    lower_conf_better_iou = box(0.5, 0.5, 0.2, 0.2, conf=0.8)
    higher_conf_worse_iou = box(0.53, 0.5, 0.2, 0.2, conf=0.9)
    m = match_detections([lower_conf_better_iou, higher_conf_worse_iou], gt, 0.5)
    # Row order is by confidence: the 0.9 one matches first.
    assert m.confidences.tolist() == [0.9, 0.8]
    assert m.is_tp.tolist() == [True, False]


def test_duplicate_detections_are_fp():
    gt = [box(0.5, 0.5, 0.2, 0.2)]
    preds = [box(0.5, 0.5, 0.2, 0.2, conf=0.9), box(0.5, 0.5, 0.2, 0.2, conf=0.8)]
    m = match_detections(preds, gt, 0.5)
    assert m.is_tp.tolist() == [True, False]


def test_class_mismatch_never_matches():
    gt = [box(0.5, 0.5, 0.2, 0.2, cls=1)]
    preds = [box(0.5, 0.5, 0.2, 0.2, cls=0, conf=0.9)]
    m = match_detections(preds, gt, 0.5)
    assert m.is_tp.tolist() == [False]


def step_by_step_oracle(preds, gts, threshold):
    """Literal transcription of the greedy protocol, one step at a time."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    used = set()
    flags = []
    for i in order:
        best, best_ov = None, 0.0
        for j, g in enumerate(gts):
            if j in used or g.class_id != preds[i].class_id:
                continue
            ov = iou(preds[i], g)
            if ov > best_ov:
                best, best_ov = j, ov
        if best is not None and best_ov >= threshold:
            used.add(best)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def test_matching_equals_protocol_oracle():
    rng = np.random.default_rng(6)
    for _ in range(25):
        gts = [
            box(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.2, 0.2, cls=int(rng.integers(0, 2)))
            for _ in range(5)
        ]
        preds = [
            box(
                rng.uniform(0.2, 0.8),
                rng.uniform(0.2, 0.8),
                0.2,
                0.2,
                cls=int(rng.integers(0, 2)),
                conf=float(rng.uniform(0, 1)),
            )
            for _ in range(10)
        ]
        m = match_detections(preds, gts, 0.4)
        assert m.is_tp.tolist() == step_by_step_oracle(preds, gts, 0.4)


# ------------------------------------------------------------------- ap


def test_perfect_single_prediction():
    m = match_detections([box(0.5, 0.5, 0.2, 0.2, conf=0.9)], [box(0.5, 0.5, 0.2, 0.2)], 0.5)
    assert average_precision(m) == 1.0


def test_ap_staircase_fixture():
    # Flags [TP, FP, TP] with 2 ground truths: hand enumeration gives
    # 0.5 * 1 + 0.5 * (2/3) = 5/6.
    m = MatchResult(
        class_ids=np.array([0, 0, 0]),
        confidences=np.array([0.9, 0.8, 0.7]),
        is_tp=np.array([True, False, True]),
        gt_counts={0: 2},
    )
    assert abs(average_precision(m, 0) - 5.0 / 6.0) < 1e-9


def test_all_fp_zero_ap():
    m = MatchResult(
        class_ids=np.array([0, 0]),
        confidences=np.array([0.9, 0.8]),
        is_tp=np.array([False, False]),
        gt_counts={0: 3},
    )
    assert average_precision(m, 0) == 0.0


def test_no_ground_truth_raises():
    m = MatchResult(
        class_ids=np.array([0]),
        confidences=np.array([0.9]),
        is_tp=np.array([False]),
        gt_counts={},
    )
    with pytest.raises(NoGroundTruth):
        average_precision(m, 0)


def test_ap_invariant_to_monotone_confidence_rescale():
    rng = np.random.default_rng(17)
    gts = [box(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), 0.15, 0.15) for _ in range(6)]
    preds = [
        box(
            g.cx + rng.uniform(-0.05, 0.05),
            g.cy + rng.uniform(-0.05, 0.05),
            0.15,
            0.15,
            conf=float(rng.uniform(0.1, 0.9)),
        )
        for g in gts
    ]
    base = average_precision(match_detections(preds, gts, 0.5), 0)
    squashed = [
        DetectionBox(p.class_id, p.cx, p.cy, p.w, p.h, p.confidence**3) for p in preds
    ]
    assert abs(average_precision(match_detections(squashed, gts, 0.5), 0) - base) < 1e-12


# ------------------------------------------------------------ evaluate


def test_perfect_predictor_all_ones():
    rng = np.random.default_rng(23)
    gts_by_image = {}
    for i in range(10):
        gts_by_image[f"img{i}"] = [
            box(rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), 0.2, 0.2, cls=i % 2)
            for _ in range(3)
        ]
    table = evaluate(gts_by_image, gts_by_image)
    for t in DEFAULT_THRESHOLDS:
        assert table.mean_ap[t] == 1.0
        for c in table.class_ids:
            assert table.ap[t][c] == 1.0


def test_empty_predictions_all_zero():
    gts = {"a": [box(0.5, 0.5, 0.2, 0.2)]}
    table = evaluate({"a": []}, gts)
    for t in DEFAULT_THRESHOLDS:
        assert table.mean_ap[t] == 0.0


def test_empty_ground_truth_raises():
    with pytest.raises(EmptyGroundTruth):
        evaluate({"a": [box(0.5, 0.5, 0.2, 0.2, conf=0.5)]}, {"a": []})


def test_map_monotone_under_jitter():
    rng = np.random.default_rng(29)
    gts_by_image, preds_by_image = {}, {}
    for i in range(30):
        gts = [
            box(rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75), 0.25, 0.25) for _ in range(2)
        ]
        preds = [
            DetectionBox(
                g.class_id,
                g.cx + 0.05 * g.w * rng.uniform(-1, 1),
                g.cy + 0.05 * g.h * rng.uniform(-1, 1),
                g.w,
                g.h,
                float(rng.uniform(0.5, 1.0)),
            )
            for g in gts
        ]
        gts_by_image[f"img{i}"] = gts
        preds_by_image[f"img{i}"] = preds
    table = evaluate(preds_by_image, gts_by_image)
    values = [table.mean_ap[t] for t in DEFAULT_THRESHOLDS]
    assert values[0] == 1.0
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] < 1.0


def test_table_formats():
    gts = {"a": [box(0.5, 0.5, 0.2, 0.2)]}
    table = evaluate(gts, gts)
    text = table.to_text()
    assert "mAP@0.5" in text and "mAP@0.9" in text
    csv = table.to_csv()
    assert csv.splitlines()[0] == "threshold,ap_class0,map"
    assert len(csv.splitlines()) == 6
