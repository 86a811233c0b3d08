"""Whole-model wrapper and construction from config."""

from __future__ import annotations

import torch
from torch import nn

from ..config import ModelConfig, RunConfig
from .decoder import MaskProposalSet, QueryDecoder, propose_masks
from .encoder import PretrainedVisionAdapter, ToyImageEncoder
from .features import DenseFeatures, extract_dense_features
from .semantic import SemanticProjection, project_semantic, semantic_probabilities
from .text_bank import TextBank


class Segmenter(nn.Module):
    def __init__(self, encoder: nn.Module, projection: SemanticProjection, decoder: QueryDecoder):
        super().__init__()
        self.encoder = encoder
        self.projection = projection
        self.decoder = decoder

    def dense(self, images: torch.Tensor) -> DenseFeatures:
        return extract_dense_features(images, self.encoder)

    def forward(self, images: torch.Tensor, bank: TextBank):
        """Full training-time pass: (probability map, mask proposals)."""
        feats = self.dense(images)
        projected = project_semantic(feats, self.projection)
        probs = semantic_probabilities(projected, bank)
        proposals = propose_masks(feats, self.decoder)
        return feats, projected, probs, proposals


def build_segmenter(cfg: RunConfig, stop_gradient: bool | None = None) -> Segmenter:
    m: ModelConfig = cfg.model
    if stop_gradient is None:
        stop_gradient = cfg.training.stop_grad
    if m.backend == "toy":
        encoder = ToyImageEncoder(
            e_v=m.e_v,
            patch_size=m.patch_size,
            layers=m.encoder_layers,
            heads=m.encoder_heads,
            base_input=m.crop_size,
            seed=cfg.seed,
        )
    elif m.backend == "pretrained":
        encoder = PretrainedVisionAdapter()
        if encoder.e_v != m.e_v or encoder.patch_size != m.patch_size:
            raise ValueError(
                f"pretrained backend has e_v={encoder.e_v}, patch={encoder.patch_size}; "
                f"config says e_v={m.e_v}, patch={m.patch_size}"
            )
    else:
        raise ValueError(f"unknown model backend {m.backend!r}")
    projection = SemanticProjection(m.e_v, m.e_t)
    from .encoder import seeded_init_
    seeded_init_(projection, cfg.seed + 1)
    decoder = QueryDecoder(
        e_v=m.e_v,
        d=m.d,
        n_q=m.n_q,
        layers=m.decoder_layers,
        heads=m.decoder_heads,
        stop_gradient=stop_gradient,
        seed=cfg.seed + 2,
    )
    return Segmenter(encoder, projection, decoder)


__all__ = [
    "Segmenter",
    "build_segmenter",
    "MaskProposalSet",
    "propose_masks",
]
