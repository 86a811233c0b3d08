"""Image encoders behind one interface: forward (B, 3, H, W) float images in
[0, 1] to a (B, e_v, H/patch, W/patch) feature grid.

The toy encoder (patchify conv + optional position embedding + a small
pre-norm transformer) is seeded and fully deterministic; it backs every test.
The pretrained adapter is optional plumbing for real images.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def seeded_init_(module: nn.Module, seed: int) -> None:
    """Deterministic parameter init: matrices ~ N(0, 0.02^2), 1-d weights
    (norm scales) to 1, biases to 0."""
    g = torch.Generator()
    g.manual_seed(seed)
    for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
        with torch.no_grad():
            if p.ndim >= 2:
                p.normal_(0.0, 0.02, generator=g)
            elif name.endswith(".weight") or name.endswith("weight"):
                p.fill_(1.0)
            else:
                p.zero_()


class _PreNormBlock(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(nn.Linear(width, 4 * width), nn.GELU(), nn.Linear(4 * width, width))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        x = x + self.attn(h, h, h, need_weights=False)[0]
        return x + self.mlp(self.norm2(x))


class ToyImageEncoder(nn.Module):
    def __init__(
        self,
        e_v: int,
        patch_size: int = 16,
        layers: int = 2,
        heads: int = 4,
        base_input: int = 384,
        use_pos: bool = True,
        seed: int = 0,
    ):
        super().__init__()
        if e_v < 1 or patch_size < 1 or layers < 0:
            raise ValueError(f"bad encoder dims: e_v={e_v} patch={patch_size} layers={layers}")
        self.e_v = e_v
        self.patch_size = patch_size
        self.use_pos = use_pos
        self.patchify = nn.Conv2d(3, e_v, kernel_size=patch_size, stride=patch_size)
        base_grid = max(1, base_input // patch_size)
        self.pos_embed = nn.Parameter(torch.zeros(1, e_v, base_grid, base_grid))
        self.blocks = nn.ModuleList(_PreNormBlock(e_v, heads) for _ in range(layers))
        self.final_norm = nn.LayerNorm(e_v)
        seeded_init_(self, seed)

    def _pos_for(self, h: int, w: int) -> torch.Tensor:
        if self.pos_embed.shape[-2:] == (h, w):
            return self.pos_embed
        return F.interpolate(self.pos_embed, size=(h, w), mode="bilinear", align_corners=False)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        x = (images - 0.5) / 0.5
        x = self.patchify(x)                       # (B, e_v, h, w)
        if self.use_pos:
            x = x + self._pos_for(x.shape[-2], x.shape[-1])
        B, C, h, w = x.shape
        t = x.flatten(2).transpose(1, 2)           # (B, hw, e_v)
        for blk in self.blocks:
            t = blk(t)
        t = self.final_norm(t)
        return t.transpose(1, 2).reshape(B, C, h, w)


class PretrainedVisionAdapter(nn.Module):
    """Wraps a pretrained vision-language image tower (loaded through the
    `transformers` library) into the same grid-feature interface. Optional:
    nothing in the test suite requires network weights."""

    def __init__(self, model_name: str = "openai/clip-vit-base-patch16", model=None):
        super().__init__()
        if model is None:
            try:
                from transformers import CLIPVisionModel
            except ImportError as exc:
                raise ImportError(
                    "the pretrained adapter needs the optional 'transformers' package"
                ) from exc
            model = CLIPVisionModel.from_pretrained(model_name)
        self.vision = model
        self.patch_size = int(self.vision.config.patch_size)
        self.e_v = int(self.vision.config.hidden_size)
        mean = torch.tensor([0.48145466, 0.4578275, 0.40821073]).view(1, 3, 1, 1)
        std = torch.tensor([0.26862954, 0.26130258, 0.27577711]).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        B, _, H, W = images.shape
        x = (images - self.mean) / self.std
        out = self.vision(pixel_values=x, interpolate_pos_encoding=True)
        tokens = out.last_hidden_state[:, 1:]       # drop the class token
        h, w = H // self.patch_size, W // self.patch_size
        return tokens.transpose(1, 2).reshape(B, self.e_v, h, w)
