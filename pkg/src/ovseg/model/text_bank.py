"""Frozen bank of category text embeddings. Row 0 is always the background
class, which gets its own prompt-derived embedding like any other category."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..curation.prompts import DEFAULT_TEMPLATES, TextEncoder, encode_category_prompts


@dataclass
class TextBank:
    embeddings: torch.Tensor            # (|C|, e_t), rows unit-norm
    category_names: list[str]
    frozen: bool = field(default=True)

    def __post_init__(self):
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] != len(self.category_names):
            raise ValueError(
                f"bank shape {tuple(self.embeddings.shape)} vs {len(self.category_names)} names"
            )
        if len(set(self.category_names)) != len(self.category_names):
            raise ValueError(f"category names must be distinct: {self.category_names}")
        norms = self.embeddings.norm(dim=1)
        if (norms - 1.0).abs().max().item() > 1e-5:
            raise ValueError("bank rows must be unit-norm")
        self.embeddings = self.embeddings.detach()
        self.embeddings.requires_grad_(False)

    def __len__(self) -> int:
        return len(self.category_names)

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    def index_of(self, name: str) -> int:
        return self.category_names.index(name)


def build_text_bank(
    class_names: list[str],
    text_encoder: TextEncoder,
    templates: tuple[str, ...] | list[str] | None = None,
) -> TextBank:
    """Encode one pooled prompt embedding per class name (background first by
    pipeline convention, though the bank itself is order-agnostic)."""
    if not class_names:
        raise ValueError("class_names must be non-empty")
    templates = tuple(templates) if templates else DEFAULT_TEMPLATES
    rows = [encode_category_prompts(name, templates, text_encoder).embedding for name in class_names]
    emb = torch.from_numpy(np.stack(rows).astype(np.float32))
    return TextBank(embeddings=emb, category_names=list(class_names))


def extend_text_bank(bank: TextBank, new_names: list[str], text_encoder: TextEncoder,
                     templates: tuple[str, ...] | list[str] | None = None) -> TextBank:
    """New bank with extra categories appended; the original is untouched, so
    adding prediction-time categories never mutates a trained model."""
    fresh = [n for n in new_names if n not in bank.category_names]
    if not fresh:
        return bank
    extra = build_text_bank(fresh, text_encoder, templates)
    return TextBank(
        embeddings=torch.cat([bank.embeddings, extra.embeddings], dim=0),
        category_names=bank.category_names + fresh,
    )
