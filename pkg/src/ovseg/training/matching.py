"""Bipartite matching between mask proposals and ground-truth instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy.optimize import linear_sum_assignment

from .losses import bce_mask_loss, dice_loss


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]    # (proposal index, ground-truth index)

    def __post_init__(self):
        rows = [p for p, _ in self.pairs]
        cols = [g for _, g in self.pairs]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ValueError(f"assignment not injective: {self.pairs}")


def matching_cost(masks: torch.Tensor, gts: torch.Tensor) -> np.ndarray:
    """cost[q][g] = dice(M_q, gt_g) + bce(M_q, gt_g), the same composition as
    the training loss. masks: (n_q, h, w) soft; gts: (n_gt, h, w) binary."""
    if gts.shape[0] < 1:
        raise ValueError("matching needs at least one ground-truth mask")
    if masks.shape[1:] != gts.shape[1:]:
        raise ValueError(f"grid mismatch: proposals {tuple(masks.shape[1:])} vs gts {tuple(gts.shape[1:])}")
    empty = [int(g) for g in range(gts.shape[0]) if not bool(gts[g].any())]
    if empty:
        raise ValueError(f"empty ground-truth masks at indices {empty}; filter them upstream")
    with torch.no_grad():
        p = masks.flatten(1).double()                       # (n_q, P)
        t = gts.flatten(1).double()                         # (n_gt, P)
        P = p.shape[1]
        inter = p @ t.T
        dice = 1.0 - (2.0 * inter + 1.0) / (p.sum(1, keepdim=True) + t.sum(1) + 1.0)
        pc = p.clamp(1e-7, 1.0 - 1e-7)
        bce = (-pc.log() @ t.T - (1.0 - pc).log() @ (1.0 - t).T) / P
        cost = (dice + bce).cpu().numpy()
    if not np.isfinite(cost).all():
        raise FloatingPointError("non-finite matching cost")
    return cost


def _lsa_total(costs: np.ndarray) -> float:
    r, c = linear_sum_assignment(costs)
    return float(costs[r, c].sum())


def hungarian_match(costs: np.ndarray) -> Assignment:
    """Minimum-cost injective assignment of min(n_q, n_gt) pairs.

    Among cost-optimal assignments, returns the lexicographically first pair
    list. The equality test against the optimal total uses a small relative
    tolerance to absorb summation-order drift; for generic costs the optimum
    is unique and the tolerance is irrelevant.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.ndim != 2 or costs.shape[0] == 0 or costs.shape[1] == 0:
        raise ValueError(f"cost matrix must be 2-d and non-empty, got shape {costs.shape}")
    if not np.isfinite(costs).all():
        raise FloatingPointError("cost matrix contains non-finite entries")
    n, m = costs.shape
    needed = min(n, m)
    best = _lsa_total(costs)
    tol = 1e-9 * (1.0 + abs(best))

    pairs: list[tuple[int, int]] = []
    rows = list(range(n))
    cols = list(range(m))
    target = best
    while len(pairs) < needed:
        remaining = needed - len(pairs) - 1
        placed = False
        for ri, i in enumerate(rows):
            if len(rows) - ri - 1 < remaining:
                break   # not enough rows left below i for the rest
            for j in cols:
                sub_rows = rows[ri + 1 :]
                sub_cols = [c for c in cols if c != j]
                if remaining == 0:
                    sub_total = 0.0
                else:
                    if min(len(sub_rows), len(sub_cols)) < remaining:
                        continue
                    sub_total = _lsa_total(costs[np.ix_(sub_rows, sub_cols)])
                if abs(costs[i, j] + sub_total - target) <= tol:
                    pairs.append((i, j))
                    rows = sub_rows
                    cols = sub_cols
                    target -= costs[i, j]
                    placed = True
                    break
            if placed:
                break
        if not placed:   # tolerance too tight for this decomposition; fall back
            r, c = linear_sum_assignment(costs)
            return Assignment(pairs=sorted(zip(r.tolist(), c.tolist())))
    return Assignment(pairs=pairs)
