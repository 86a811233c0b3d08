"""Instance head: learned queries refined by a transformer decoder over
value-projected features, emitting one soft mask per query.

The value path consumes a gradient-blocked copy of the features (unless the
decoder was built with stop_gradient=False for ablation), so the mask loss
can never reach the encoder or the semantic projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .encoder import seeded_init_
from .features import DenseFeatures
from .ops import l2_normalize


@dataclass
class MaskProposalSet:
    masks: torch.Tensor                     # (B, n_q, h, w), sigmoid outputs
    refined_queries: torch.Tensor           # (B, n_q, d), rows unit-norm
    aux_masks: list[torch.Tensor] = field(default_factory=list)   # one per pre-final stage

    @property
    def n_q(self) -> int:
        return int(self.masks.shape[1])


def _three_layer_mlp(d_in: int, d_hidden: int, d_out: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(d_in, d_hidden), nn.ReLU(),
        nn.Linear(d_hidden, d_hidden), nn.ReLU(),
        nn.Linear(d_hidden, d_out),
    )


class _DecoderLayer(nn.Module):
    def __init__(self, d: int, heads: int):
        super().__init__()
        self.norm_self = nn.LayerNorm(d)
        self.self_attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm_cross = nn.LayerNorm(d)
        self.cross_attn = nn.MultiheadAttention(d, heads, batch_first=True)
        self.norm_mlp = nn.LayerNorm(d)
        self.mlp = nn.Sequential(nn.Linear(d, 4 * d), nn.GELU(), nn.Linear(4 * d, d))

    def forward(self, q: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        h = self.norm_self(q)
        q = q + self.self_attn(h, h, h, need_weights=False)[0]
        h = self.norm_cross(q)
        q = q + self.cross_attn(h, memory, memory, need_weights=False)[0]
        return q + self.mlp(self.norm_mlp(q))


class QueryDecoder(nn.Module):
    def __init__(
        self,
        e_v: int,
        d: int,
        n_q: int = 100,
        layers: int = 6,
        heads: int = 8,
        stop_gradient: bool = True,
        seed: int = 0,
    ):
        super().__init__()
        if n_q < 1:
            raise ValueError(f"n_q must be >= 1, got {n_q}")
        if layers < 1:
            raise ValueError(f"decoder needs >= 1 layer, got {layers}")
        self.stop_gradient = stop_gradient
        self.queries = nn.Parameter(torch.zeros(n_q, d))
        self.value_ffn = _three_layer_mlp(e_v, 2 * e_v, d)
        self.query_ffn = _three_layer_mlp(d, 2 * d, d)
        self.layers = nn.ModuleList(_DecoderLayer(d, heads) for _ in range(layers))
        seeded_init_(self, seed)
        # zero the last value layer: fresh models emit exactly-0.5 masks,
        # which binarize (strict >) to nothing instead of noise
        with torch.no_grad():
            self.value_ffn[-1].weight.zero_()
            self.value_ffn[-1].bias.zero_()

    @property
    def n_q(self) -> int:
        return int(self.queries.shape[0])


def propose_masks(feats: DenseFeatures, dec: QueryDecoder) -> MaskProposalSet:
    """Soft masks sigmoid(Q_hat . V) for the refined queries of the final
    decoder stage, plus one auxiliary mask set per earlier stage (the initial
    queries and each non-final layer), all scored against the same V."""
    x = feats.values
    if dec.stop_gradient:
        x = x.detach()
    B, e_v, h, w = x.shape
    tokens = x.flatten(2).transpose(1, 2)                   # (B, hw, e_v)
    v_tokens = dec.value_ffn(tokens)                        # (B, hw, d)
    v_map = v_tokens.transpose(1, 2).reshape(B, -1, h, w)   # (B, d, h, w)

    def masks_from(q: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        qn = l2_normalize(dec.query_ffn(q), dim=-1)
        logits = torch.einsum("bqd,bdhw->bqhw", qn, v_map)
        return torch.sigmoid(logits), qn

    q = dec.queries.unsqueeze(0).expand(B, -1, -1)
    stages = [q]
    for layer in dec.layers:
        q = layer(q, v_tokens)
        stages.append(q)
    aux = [masks_from(s)[0] for s in stages[:-1]]
    final_masks, refined = masks_from(stages[-1])
    return MaskProposalSet(masks=final_masks, refined_queries=refined, aux_masks=aux)
