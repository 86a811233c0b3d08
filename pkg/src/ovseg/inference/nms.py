"""Greedy category-agnostic mask NMS."""

from __future__ import annotations

from ..evaluation.iou import binary_iou


def mask_nms(predictions: list, iou_threshold: float = 0.5) -> list:
    """Keep the highest-confidence prediction, suppress any later one whose
    binary-mask IoU with something already kept reaches the threshold.
    Suppression ignores categories: redundancy is a per-object phenomenon.

    Items need `.mask` (binary array) and `.confidence`. The input is
    re-sorted (stable) by descending confidence, so ties keep input order.
    """
    ordered = sorted(predictions, key=lambda p: -p.confidence)
    kept: list = []
    for cand in ordered:
        if all(binary_iou(cand.mask, k.mask) < iou_threshold for k in kept):
            kept.append(cand)
    return kept
