"""COCO-style mask average precision.

Conventions fixed here (and mirrored by the from-definition oracle in the
test suite): 101-point interpolated precision, at most 100 detections per
image, predictions processed in score-descending order with ties kept in
input order, greedy matching of each prediction to the unmatched ground truth
with the highest IoU at or above the threshold, and category means taken over
categories with at least one ground-truth instance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from ..errors import EvaluationError
from .iou import binary_iou

DEFAULT_IOU_THRESHOLDS = tuple(np.round(np.arange(0.50, 0.96, 0.05), 2))
MAX_DETECTIONS_PER_IMAGE = 100
RECALL_LEVELS = np.linspace(0.0, 1.0, 101)

# predictions: {image_id: [(mask, category, score), ...]}
# ground truth: {image_id: [(mask, category), ...]}
Predictions = dict[str, list[tuple[np.ndarray, Hashable, float]]]
GroundTruths = dict[str, list[tuple[np.ndarray, Hashable]]]


@dataclass
class DetectionEvalResult:
    ap: float
    ap50: float
    ap75: float
    mode: str
    per_threshold: dict[float, float] = field(default_factory=dict)


def _cap_detections(preds: list[tuple[np.ndarray, Hashable, float]]):
    order = sorted(range(len(preds)), key=lambda i: -preds[i][2])
    return [preds[i] for i in order[:MAX_DETECTIONS_PER_IMAGE]]


def _interpolated_ap(scores: list[float], is_tp: list[bool], num_gt: int) -> float:
    if num_gt == 0:
        raise ValueError("AP undefined without ground truths")
    if not scores:
        return 0.0
    tp = np.cumsum(np.asarray(is_tp, dtype=np.float64))
    fp = np.cumsum(~np.asarray(is_tp, dtype=bool))
    recall = tp / num_gt
    precision = tp / np.maximum(tp + fp, 1e-12)
    # precision envelope, then sample at the 101 recall levels
    for i in range(len(precision) - 2, -1, -1):
        precision[i] = max(precision[i], precision[i + 1])
    inds = np.searchsorted(recall, RECALL_LEVELS, side="left")
    sampled = np.zeros(len(RECALL_LEVELS))
    valid = inds < len(precision)
    sampled[valid] = precision[inds[valid]]
    return float(sampled.mean())


def compute_mask_ap(
    predictions: Predictions,
    ground_truths: GroundTruths,
    iou_thresholds: tuple[float, ...] = DEFAULT_IOU_THRESHOLDS,
    mode: str = "class_aware",
) -> DetectionEvalResult:
    if mode not in ("class_aware", "class_agnostic"):
        raise EvaluationError(f"mode must be class_aware|class_agnostic, got {mode!r}")
    if mode == "class_agnostic":
        predictions = {
            img: [(m, "object", s) for m, _, s in preds] for img, preds in predictions.items()
        }
        ground_truths = {
            img: [(m, "object") for m, _ in gts] for img, gts in ground_truths.items()
        }
    num_gt_total = sum(len(g) for g in ground_truths.values())
    if num_gt_total == 0:
        raise EvaluationError("AP is undefined: no ground-truth instances at all")

    capped = {img: _cap_detections(preds) for img, preds in predictions.items()}
    categories = sorted({c for gts in ground_truths.values() for _, c in gts}, key=repr)

    per_threshold: dict[float, float] = {}
    for thr in iou_thresholds:
        cat_aps = []
        for cat in categories:
            num_gt = sum(1 for gts in ground_truths.values() for _, c in gts if c == cat)
            entries = []   # (score, insertion order, image, mask)
            order = 0
            for img in sorted(capped, key=repr):
                for mask, c, score in capped[img]:
                    if c == cat:
                        entries.append((score, order, img, mask))
                        order += 1
            entries.sort(key=lambda e: (-e[0], e[1]))
            matched: dict[str, set[int]] = {img: set() for img in ground_truths}
            scores, is_tp = [], []
            for score, _, img, mask in entries:
                gts = [
                    (gi, gm) for gi, (gm, gc) in enumerate(ground_truths.get(img, []))
                    if gc == cat and gi not in matched.get(img, set())
                ]
                best_iou, best_gi = 0.0, None
                for gi, gm in gts:
                    iou = binary_iou(mask, gm)
                    if iou > best_iou:
                        best_iou, best_gi = iou, gi
                scores.append(score)
                if best_gi is not None and best_iou >= thr:
                    matched.setdefault(img, set()).add(best_gi)
                    is_tp.append(True)
                else:
                    is_tp.append(False)
            cat_aps.append(_interpolated_ap(scores, is_tp, num_gt))
        per_threshold[float(thr)] = float(np.mean(cat_aps))

    ap = float(np.mean(list(per_threshold.values())))
    return DetectionEvalResult(
        ap=ap,
        ap50=per_threshold.get(0.5, float("nan")),
        ap75=per_threshold.get(0.75, float("nan")),
        mode=mode,
        per_threshold=per_threshold,
    )
