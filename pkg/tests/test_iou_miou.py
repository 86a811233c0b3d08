import numpy as np
import pytest

from ovseg.errors import EvaluationError
from ovseg.evaluation.iou import binary_iou
from ovseg.evaluation.miou import compute_miou

from _oracles import oracle_binary_iou, oracle_miou


def test_binary_iou_hand_cases():
    a = np.zeros((4, 4), dtype=np.uint8)
    b = np.zeros((4, 4), dtype=np.uint8)
    a[:2, :2] = 1           # 4 px
    b[1:3, 1:3] = 1         # 4 px, overlap 1
    assert binary_iou(a, b) == pytest.approx(1.0 / 7.0)
    assert binary_iou(a, a) == 1.0
    assert binary_iou(a, np.zeros_like(a)) == 0.0


def test_binary_iou_both_empty_is_zero():
    z = np.zeros((3, 3), dtype=np.uint8)
    assert binary_iou(z, z) == 0.0


def test_binary_iou_matches_oracle(rng):
    for _ in range(20):
        a = (rng.random((8, 8)) > 0.5).astype(np.uint8)
        b = (rng.random((8, 8)) > 0.5).astype(np.uint8)
        assert binary_iou(a, b) == pytest.approx(oracle_binary_iou(a, b))


def test_miou_matches_confusion_matrix_oracle(rng):
    preds = [rng.integers(0, 4, size=(10, 10)) for _ in range(5)]
    gts = [rng.integers(0, 4, size=(10, 10)) for _ in range(5)]
    result = compute_miou(preds, gts, num_classes=4)
    per_class, miou = oracle_miou(preds, gts, 4)
    assert result.miou == pytest.approx(miou, abs=1e-12)
    for got, exp in zip(result.per_class_iou, per_class):
        if exp is None:
            assert got is None
        else:
            assert got == pytest.approx(exp, abs=1e-12)


def test_miou_aggregates_over_dataset_not_per_image():
    # class 1 present in image A only; dataset-level IoU pools intersections
    # and unions across images rather than averaging per-image ratios
    pred_a = np.array([[1, 1], [0, 0]])
    gt_a = np.array([[1, 0], [0, 0]])
    pred_b = np.array([[0, 0], [0, 1]])
    gt_b = np.array([[0, 0], [0, 0]])
    result = compute_miou([pred_a, pred_b], [gt_a, gt_b], num_classes=2)
    # class 1: intersections 1, union 3 (pixels predicted or labeled 1)
    assert result.per_class_iou[1] == pytest.approx(1.0 / 3.0)


def test_miou_absent_class_excluded(rng):
    preds = [np.zeros((4, 4), dtype=np.int64)]
    gts = [np.zeros((4, 4), dtype=np.int64)]
    result = compute_miou(preds, gts, num_classes=3)
    assert result.per_class_iou[0] == pytest.approx(1.0)
    assert result.per_class_iou[1] is None
    assert result.per_class_iou[2] is None
    assert result.miou == pytest.approx(1.0)
    assert result.present_classes() == [0]


def test_miou_validates_inputs(rng):
    with pytest.raises(EvaluationError):
        compute_miou([], [], num_classes=2)
    with pytest.raises(EvaluationError):
        compute_miou([np.zeros((2, 2), int)], [np.zeros((3, 3), int)], num_classes=2)
    with pytest.raises(EvaluationError):
        compute_miou([np.full((2, 2), 9)], [np.zeros((2, 2), int)], num_classes=2)
