"""Binary mask IoU, the primitive shared by mIoU, AP and NMS."""

from __future__ import annotations

import numpy as np


def binary_iou(a: np.ndarray, b: np.ndarray) -> float:
    """|a & b| / |a | b|. Returns 0.0 when both masks are empty; callers that
    want both-empty to count as a match must special-case it themselves."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    a = a.astype(bool)
    b = b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)
