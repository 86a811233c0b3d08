"""Dense feature extraction: encoder patch features upsampled by a factor of
two on each spatial axis."""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass
class DenseFeatures:
    values: torch.Tensor            # (B, e_v, h, w)
    input_hw: tuple[int, int]       # original image size the grid maps back to

    def __post_init__(self):
        if self.values.ndim != 4:
            raise ValueError(f"expected (B, C, h, w) features, got shape {tuple(self.values.shape)}")
        if self.values.shape[-1] < 1 or self.values.shape[-2] < 1:
            raise ValueError(f"empty feature grid: {tuple(self.values.shape)}")

    @property
    def grid_hw(self) -> tuple[int, int]:
        return (int(self.values.shape[-2]), int(self.values.shape[-1]))


def upsample_double(x: torch.Tensor) -> torch.Tensor:
    """Factor-2 interpolation that keeps original samples on the even grid:
    out[2i] = in[i], out[2i+1] = (in[i] + in[i+1]) / 2, with the trailing
    half-step replicating the border sample. Output is exactly (2h, 2w)."""
    nxt = torch.cat([x[..., 1:, :], x[..., -1:, :]], dim=-2)
    x = torch.stack([x, (x + nxt) / 2], dim=-2).flatten(-3, -2)
    nxt = torch.cat([x[..., :, 1:], x[..., :, -1:]], dim=-1)
    x = torch.stack([x, (x + nxt) / 2], dim=-1).flatten(-2, -1)
    return x


def extract_dense_features(images: torch.Tensor, encoder) -> DenseFeatures:
    """Run the encoder and upsample its patch-feature grid by 2x.

    `images` is (B, 3, H, W) float in [0, 1]; the encoder handles its own
    input normalization and returns (B, e_v, H/patch, W/patch).
    """
    if images.ndim != 4:
        raise ValueError(f"expected (B, 3, H, W) images, got shape {tuple(images.shape)}")
    B, C, H, W = images.shape
    patch = encoder.patch_size
    if H < patch or W < patch:
        raise ValueError(f"image {H}x{W} smaller than one {patch}x{patch} patch")
    if H % patch or W % patch:
        raise ValueError(f"image {H}x{W} not divisible by the patch size {patch}")
    feats = encoder(images)
    if not torch.isfinite(feats).all():
        raise FloatingPointError("encoder produced non-finite features")
    return DenseFeatures(values=upsample_double(feats), input_hw=(H, W))
