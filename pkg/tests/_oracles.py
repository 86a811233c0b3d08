"""Independent reference implementations used to check the package.

Everything here is written from first principles with plain loops, on
purpose: slow, obvious, and sharing no code with the library under test.
"""

from __future__ import annotations

import itertools

import numpy as np


def oracle_assignment(costs: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost injective assignment by exhaustive enumeration.

    Returns the lexicographically first pair list among all assignments whose
    total is within a tiny tolerance of the optimum. Only usable for small
    matrices (factorial blow-up).
    """
    costs = np.asarray(costs, dtype=np.float64)
    n, m = costs.shape
    needed = min(n, m)
    candidates: list[tuple[float, list[tuple[int, int]]]] = []
    for rows in itertools.combinations(range(n), needed):
        for cols in itertools.permutations(range(m), needed):
            pairs = sorted(zip(rows, cols))
            total = sum(costs[i, j] for i, j in pairs)
            candidates.append((total, pairs))
    best = min(t for t, _ in candidates)
    tol = 1e-9 * (1.0 + abs(best))
    ties = [pairs for t, pairs in candidates if t <= best + tol]
    return min(ties)


def oracle_dice(pred: np.ndarray, target: np.ndarray, eps: float = 1.0) -> float:
    p = pred.astype(np.float64).ravel()
    t = target.astype(np.float64).ravel()
    inter = float((p * t).sum())
    return 1.0 - (2.0 * inter + eps) / (float(p.sum()) + float(t.sum()) + eps)


def oracle_bce(pred: np.ndarray, target: np.ndarray, clamp: float = 1e-7) -> float:
    p = np.clip(pred.astype(np.float64).ravel(), clamp, 1.0 - clamp)
    t = target.astype(np.float64).ravel()
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def oracle_binary_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = a.astype(bool)
    b = b.astype(bool)
    union = int((a | b).sum())
    if union == 0:
        return 0.0
    return int((a & b).sum()) / union


def oracle_miou(preds: list[np.ndarray], gts: list[np.ndarray],
                num_classes: int) -> tuple[list[float | None], float]:
    """Per-class IoU from a dataset-level confusion matrix."""
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, g in zip(preds, gts):
        for gi, pi in zip(g.ravel(), p.ravel()):
            conf[int(gi), int(pi)] += 1
    per_class: list[float | None] = []
    for c in range(num_classes):
        tp = conf[c, c]
        union = conf[c, :].sum() + conf[:, c].sum() - tp
        per_class.append(None if union == 0 else float(tp / union))
    present = [v for v in per_class if v is not None]
    return per_class, float(np.mean(present))


def oracle_mask_ap(
    preds_by_image: dict,
    gts_by_image: dict,
    thresholds: tuple[float, ...],
    max_dets: int = 100,
) -> dict[float, float]:
    """COCO-style AP from the definition: per-category PR curves, greedy
    score-descending matching, 101-point interpolation."""
    capped = {}
    for img, preds in preds_by_image.items():
        order = sorted(range(len(preds)), key=lambda i: -preds[i][2])
        capped[img] = [preds[i] for i in order[:max_dets]]

    categories = sorted({c for gts in gts_by_image.values() for _, c in gts}, key=repr)
    out = {}
    for thr in thresholds:
        cat_aps = []
        for cat in categories:
            num_gt = sum(1 for gts in gts_by_image.values() for _, c in gts if c == cat)
            dets = []
            order = 0
            for img in sorted(capped, key=repr):
                for mask, c, score in capped[img]:
                    if c == cat:
                        dets.append((score, order, img, mask))
                        order += 1
            dets.sort(key=lambda e: (-e[0], e[1]))
            used: dict = {img: set() for img in gts_by_image}
            tps = []
            for score, _, img, mask in dets:
                best_iou, best_gi = 0.0, None
                for gi, (gm, gc) in enumerate(gts_by_image.get(img, [])):
                    if gc != cat or gi in used[img]:
                        continue
                    iou = oracle_binary_iou(mask, gm)
                    if iou > best_iou:
                        best_iou, best_gi = iou, gi
                if best_gi is not None and best_iou >= thr:
                    used[img].add(best_gi)
                    tps.append(True)
                else:
                    tps.append(False)
            precisions, recalls = [], []
            tp_count = 0
            for k, is_tp in enumerate(tps, start=1):
                tp_count += int(is_tp)
                precisions.append(tp_count / k)
                recalls.append(tp_count / num_gt)
            ap_terms = []
            for level in np.linspace(0.0, 1.0, 101):
                attained = [p for p, r in zip(precisions, recalls) if r >= level - 1e-12]
                ap_terms.append(max(attained) if attained else 0.0)
            cat_aps.append(float(np.mean(ap_terms)))
        out[float(thr)] = float(np.mean(cat_aps))
    return out


def oracle_upsample_double(x: np.ndarray) -> np.ndarray:
    """Doubling along the last two axes: even outputs copy the input sample,
    odd outputs average the two neighbours, last row/column replicated."""
    *lead, h, w = x.shape
    rows = np.zeros((*lead, 2 * h, w), dtype=np.float64)
    for i in range(h):
        nxt = x[..., min(i + 1, h - 1), :]
        rows[..., 2 * i, :] = x[..., i, :]
        rows[..., 2 * i + 1, :] = 0.5 * (x[..., i, :] + nxt)
    out = np.zeros((*lead, 2 * h, 2 * w), dtype=np.float64)
    for j in range(w):
        nxt = rows[..., :, min(j + 1, w - 1)]
        out[..., :, 2 * j] = rows[..., :, j]
        out[..., :, 2 * j + 1] = 0.5 * (rows[..., :, j] + nxt)
    return out


def oracle_resize_nearest(arr: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Pixel-center nearest-neighbour gather, one output pixel at a time."""
    h, w = arr.shape[:2]
    H, W = out_hw
    out = np.zeros((H, W) + arr.shape[2:], dtype=arr.dtype)
    for i in range(H):
        for j in range(W):
            si = min(int((i + 0.5) * h / H), h - 1)
            sj = min(int((j + 0.5) * w / W), w - 1)
            out[i, j] = arr[si, sj]
    return out


def oracle_topk_by_similarity(embeddings: np.ndarray, query: np.ndarray, k: int) -> list[int]:
    """Indices of the k most similar rows; ties broken by the smaller index."""
    sims = [(float(np.dot(e.astype(np.float64), query.astype(np.float64))), i)
            for i, e in enumerate(embeddings)]
    sims.sort(key=lambda t: (-t[0], t[1]))
    return [i for _, i in sims[: min(k, len(sims))]]
