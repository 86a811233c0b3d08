"""Semantic head: project visual features into the text embedding space and
read off category probabilities against the frozen bank."""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .features import DenseFeatures
from .ops import l2_normalize
from .text_bank import TextBank


class SemanticProjection(nn.Module):
    """Per-location linear map from e_v to e_t followed by a learned layer
    norm over the text dimension."""

    def __init__(self, e_v: int, e_t: int):
        super().__init__()
        self.linear = nn.Linear(e_v, e_t, bias=False)
        self.norm = nn.LayerNorm(e_t)

    def forward(self, x: torch.Tensor) -> torch.Tensor:   # (..., e_v) -> (..., e_t)
        return self.norm(self.linear(x))


def project_semantic(feats: DenseFeatures, proj: SemanticProjection) -> torch.Tensor:
    """Unit-norm text-space field, shape (B, e_t, h, w)."""
    if not torch.isfinite(feats.values).all():
        raise FloatingPointError("non-finite features entering the semantic projection")
    x = feats.values.permute(0, 2, 3, 1)        # (B, h, w, e_v)
    x = l2_normalize(proj(x), dim=-1)
    return x.permute(0, 3, 1, 2)


def semantic_probabilities(projected: torch.Tensor, bank: TextBank) -> torch.Tensor:
    """Per-pixel softmax over cosine similarities to the bank rows; output
    (B, |C|, h, w) sums to 1 over the category axis."""
    if len(bank) == 0:
        raise ValueError("text bank is empty")
    logits = torch.einsum("ce,behw->bchw", bank.embeddings.to(projected.dtype), projected)
    return F.softmax(logits, dim=1)
