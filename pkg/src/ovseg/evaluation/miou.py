"""Semantic segmentation mIoU with dataset-level aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EvaluationError


@dataclass
class SemanticEvalResult:
    per_class_iou: list[float | None]   # None marks a class absent from pred and gt
    miou: float

    def present_classes(self) -> list[int]:
        return [c for c, v in enumerate(self.per_class_iou) if v is not None]


def compute_miou(predictions: list[np.ndarray], ground_truths: list[np.ndarray],
                 num_classes: int) -> SemanticEvalResult:
    """Per-class IoU from intersections/unions aggregated over the whole
    dataset; the mean skips classes absent from both sides everywhere."""
    if len(predictions) != len(ground_truths) or not predictions:
        raise EvaluationError(
            f"need equal non-empty lists, got {len(predictions)} predictions / "
            f"{len(ground_truths)} ground truths"
        )
    inter = np.zeros(num_classes, dtype=np.int64)
    union = np.zeros(num_classes, dtype=np.int64)
    for pred, gt in zip(predictions, ground_truths):
        if pred.shape != gt.shape:
            raise EvaluationError(f"shape mismatch: {pred.shape} vs {gt.shape}")
        for arr, name in ((pred, "prediction"), (gt, "ground truth")):
            if arr.min() < 0 or arr.max() >= num_classes:
                raise EvaluationError(
                    f"{name} labels outside [0, {num_classes - 1}]: "
                    f"[{arr.min()}, {arr.max()}]"
                )
        for c in range(num_classes):
            p = pred == c
            g = gt == c
            inter[c] += np.logical_and(p, g).sum()
            union[c] += np.logical_or(p, g).sum()
    per_class: list[float | None] = []
    present: list[float] = []
    for c in range(num_classes):
        if union[c] == 0:
            per_class.append(None)
        else:
            iou = float(inter[c] / union[c])
            per_class.append(iou)
            present.append(iou)
    if not present:
        raise EvaluationError("no class present in predictions or ground truths")
    return SemanticEvalResult(per_class_iou=per_class, miou=float(np.mean(present)))
