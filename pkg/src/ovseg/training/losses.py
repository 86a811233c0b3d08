"""Loss functions: soft dice, clamped binary cross-entropy, semantic
cross-entropy, matched mask loss over proposal/ground-truth pairs, and the
total objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..model.decoder import MaskProposalSet

DICE_EPS = 1.0
BCE_CLAMP = 1e-7


def dice_loss(pred: torch.Tensor, target: torch.Tensor, eps: float = DICE_EPS) -> torch.Tensor:
    """1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps). The smoothing term
    makes the empty-vs-empty case a clean 0 instead of 0/0."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs target {tuple(target.shape)}")
    t = target.to(pred.dtype)
    inter = (pred * t).sum()
    return 1.0 - (2.0 * inter + eps) / (pred.sum() + t.sum() + eps)


def bce_mask_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Pixel-mean binary cross-entropy; predictions clamped away from exact
    0/1 before the log."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {tuple(pred.shape)} vs target {tuple(target.shape)}")
    p = pred.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = target.to(pred.dtype)
    return -(t * p.log() + (1.0 - t) * (1.0 - p).log()).mean()


def semantic_ce_loss(probs: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean negative log probability of the target class per pixel.

    probs: (B, |C|, h, w) softmax output; target: (B, h, w) class indices.
    """
    num_classes = probs.shape[1]
    if target.min().item() < 0 or target.max().item() >= num_classes:
        raise ValueError(
            f"target labels must lie in [0, {num_classes - 1}], got "
            f"[{target.min().item()}, {target.max().item()}]"
        )
    picked = probs.gather(1, target.unsqueeze(1).long()).squeeze(1)
    return -picked.clamp_min(1e-12).log().mean()


def mask_loss(
    proposals_masks: torch.Tensor,          # (n_q, h, w) final-stage masks, one sample
    aux_masks: list[torch.Tensor],          # per-stage (n_q, h, w)
    gts: torch.Tensor,                      # (n_gt, h, w) binary
    pairs: list[tuple[int, int]],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, list[torch.Tensor]]:
    """Mean of dice+bce over the matched pairs for the final stage, and the
    same sum under the same assignment for every auxiliary stage. Unmatched
    proposals contribute nothing. Returns (l_mask, l_dice, l_bce, aux)."""
    zero = proposals_masks.sum() * 0.0
    if gts.shape[0] == 0 or not pairs:
        return zero, zero.clone(), zero.clone(), [zero.clone() for _ in aux_masks]
    dices, bces = [], []
    for q, g in pairs:
        dices.append(dice_loss(proposals_masks[q], gts[g]))
        bces.append(bce_mask_loss(proposals_masks[q], gts[g]))
    l_dice = torch.stack(dices).mean()
    l_bce = torch.stack(bces).mean()
    aux = []
    for stage in aux_masks:
        terms = [dice_loss(stage[q], gts[g]) + bce_mask_loss(stage[q], gts[g]) for q, g in pairs]
        aux.append(torch.stack(terms).mean())
    return l_dice + l_bce, l_dice, l_bce, aux


@dataclass
class LossReport:
    total: torch.Tensor
    l_ce: torch.Tensor
    l_mask: torch.Tensor
    l_dice: torch.Tensor
    l_bce: torch.Tensor
    aux: list[torch.Tensor] = field(default_factory=list)

    def scalars(self) -> dict[str, float]:
        out = {
            "total": float(self.total.detach()),
            "l_ce": float(self.l_ce.detach()),
            "l_mask": float(self.l_mask.detach()),
            "l_dice": float(self.l_dice.detach()),
            "l_bce": float(self.l_bce.detach()),
        }
        for i, a in enumerate(self.aux):
            out[f"l_aux{i}"] = float(a.detach())
        return out


def total_loss(
    l_ce: torch.Tensor,
    l_mask: torch.Tensor,
    l_dice: torch.Tensor,
    l_bce: torch.Tensor,
    aux: list[torch.Tensor],
    lambda_mask: float = 1.0,
) -> LossReport:
    """total = l_ce + lambda_mask * (final mask loss + all auxiliary mask
    losses)."""
    aux_sum = torch.stack(aux).sum() if aux else l_mask * 0.0
    total = l_ce + lambda_mask * (l_mask + aux_sum)
    return LossReport(total=total, l_ce=l_ce, l_mask=l_mask, l_dice=l_dice, l_bce=l_bce, aux=list(aux))


def proposal_mask_losses(
    proposals: MaskProposalSet,
    batch_gts: list[torch.Tensor],
    batch_pairs: list[list[tuple[int, int]]],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, list[torch.Tensor]]:
    """Batch-mean mask losses: applies `mask_loss` per sample and averages.
    Samples with zero ground-truth instances contribute zero."""
    B = proposals.masks.shape[0]
    if len(batch_gts) != B or len(batch_pairs) != B:
        raise ValueError(f"batch size mismatch: {B} proposals, {len(batch_gts)} gt lists")
    n_aux = len(proposals.aux_masks)
    l_mask = l_dice = l_bce = None
    aux_totals: list[torch.Tensor] | None = None
    for b in range(B):
        lm, ld, lb, aux = mask_loss(
            proposals.masks[b],
            [a[b] for a in proposals.aux_masks],
            batch_gts[b],
            batch_pairs[b],
        )
        if l_mask is None:
            l_mask, l_dice, l_bce, aux_totals = lm, ld, lb, aux
        else:
            l_mask = l_mask + lm
            l_dice = l_dice + ld
            l_bce = l_bce + lb
            aux_totals = [t + a for t, a in zip(aux_totals, aux)]
    assert l_mask is not None and aux_totals is not None and len(aux_totals) == n_aux
    return l_mask / B, l_dice / B, l_bce / B, [a / B for a in aux_totals]
