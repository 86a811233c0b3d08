"""Joint semantic and instance prediction.

One forward pass yields dense features; the semantic route reads per-pixel
class probabilities against the text bank, the instance route binarizes each
mask proposal, classifies it by its averaged embedding, scores it, and runs
NMS before restoring masks to the input resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.special import expit

from ..config import InferenceConfig
from ..curation.augment import resize_image, resize_nearest
from ..model.decoder import propose_masks
from ..model.segmenter import Segmenter
from ..model.semantic import project_semantic, semantic_probabilities
from ..model.text_bank import TextBank
from .nms import mask_nms


@dataclass
class SemanticPrediction:
    labels: np.ndarray      # (H, W) category indices at input resolution


@dataclass
class InstancePrediction:
    mask: np.ndarray        # (H, W) binary uint8
    category: int
    confidence: float


def _maybe_downscale(image: np.ndarray, max_long_side: int) -> np.ndarray:
    H, W = image.shape[:2]
    long_side = max(H, W)
    if long_side <= max_long_side:
        return image
    scale = max_long_side / long_side
    return resize_image(image, (max(1, round(H * scale)), max(1, round(W * scale))))


def _forward(image: np.ndarray, model: Segmenter, device: str):
    x = torch.from_numpy(image.astype(np.float32) / 255.0).permute(2, 0, 1)[None].to(device)
    feats = model.dense(x)
    projected = project_semantic(feats, model.projection)
    return feats, projected


def predict_semantic(image: np.ndarray, model: Segmenter, bank: TextBank,
                     cfg: InferenceConfig | None = None, device: str = "cpu") -> SemanticPrediction:
    """Per-pixel argmax labels, restored to the original resolution by
    bilinearly upsampling probabilities and then taking the argmax."""
    cfg = cfg or InferenceConfig()
    H, W = image.shape[:2]
    with torch.no_grad():
        work = _maybe_downscale(image, cfg.max_long_side)
        _, projected = _forward(work, model, device)
        probs = semantic_probabilities(projected, bank)
        up = F.interpolate(probs, size=(H, W), mode="bilinear", align_corners=False)
        labels = up.argmax(dim=1)[0].cpu().numpy().astype(np.int64)
    return SemanticPrediction(labels=labels)


def average_mask_embedding(projected: torch.Tensor, soft_mask: torch.Tensor, t: float) -> np.ndarray:
    """Unit-norm mean of the projected field over pixels where the soft mask
    exceeds t (strict)."""
    region = soft_mask > t
    if not bool(region.any()):
        raise ValueError("no pixel exceeds the binarization threshold")
    field = projected[0] if projected.ndim == 4 else projected    # (e_t, h, w)
    vecs = field[:, region]                                        # (e_t, n)
    avg = vecs.mean(dim=1).cpu().numpy().astype(np.float64)
    norm = np.linalg.norm(avg)
    if norm < 1e-12:
        raise ValueError("averaged embedding has zero norm")
    return avg / norm


def classify_mask(avg_embedding: np.ndarray, bank: TextBank) -> tuple[int, np.ndarray]:
    """Argmax of cosine similarity against the bank rows; ties go to the
    lower category index."""
    logits = bank.embeddings.cpu().numpy().astype(np.float64) @ avg_embedding
    return int(np.argmax(logits)), logits


def confidence_score(soft_mask: torch.Tensor, region: torch.Tensor, logits: np.ndarray,
                     temperature: float) -> float:
    """Mean soft-mask value over the binarized region times the
    temperature-scaled maximum class probability."""
    if not bool(region.any()):
        raise ValueError("empty region")
    obj_score = float(soft_mask[region].mean())
    class_factor = float(expit(temperature * float(np.max(logits))))
    return obj_score * class_factor


@dataclass
class _GridPrediction:
    mask: np.ndarray            # binary, grid resolution
    category: int
    confidence: float
    soft: torch.Tensor          # soft mask, grid resolution


def _restore_mask(pred: _GridPrediction, out_hw: tuple[int, int], cfg: InferenceConfig) -> np.ndarray:
    if cfg.restore_mode == "bilinear":
        up = F.interpolate(pred.soft[None, None], size=out_hw, mode="bilinear", align_corners=False)
        return (up[0, 0] > cfg.binarize_threshold).cpu().numpy().astype(np.uint8)
    return resize_nearest(pred.mask, out_hw)


def predict_instances(image: np.ndarray, model: Segmenter, bank: TextBank,
                      cfg: InferenceConfig | None = None, device: str = "cpu") -> list[InstancePrediction]:
    """Full instance path: propose, binarize (strict > t), classify by
    averaged embedding, score, drop background-classified proposals, NMS at
    grid resolution, then restore kept masks to the input resolution."""
    cfg = cfg or InferenceConfig()
    cfg.validate()
    H, W = image.shape[:2]
    with torch.no_grad():
        work = _maybe_downscale(image, cfg.max_long_side)
        feats, projected = _forward(work, model, device)
        proposals = propose_masks(feats, model.decoder)
        masks = proposals.masks[0]                      # (n_q, h, w)
        binary = masks > cfg.binarize_threshold
        grid_preds: list[_GridPrediction] = []
        for l in range(masks.shape[0]):
            region = binary[l]
            if not bool(region.any()):
                continue
            avg = average_mask_embedding(projected, masks[l], cfg.binarize_threshold)
            category, logits = classify_mask(avg, bank)
            if category == 0:
                continue        # background is not an instance
            conf = confidence_score(masks[l], region, logits, cfg.temperature)
            if conf < cfg.score_floor:
                continue
            grid_preds.append(_GridPrediction(
                mask=region.cpu().numpy().astype(np.uint8), category=category,
                confidence=conf, soft=masks[l],
            ))
        if cfg.apply_nms:
            grid_preds = mask_nms(grid_preds, cfg.nms_iou_threshold)
        else:
            grid_preds = sorted(grid_preds, key=lambda p: -p.confidence)
        out: list[InstancePrediction] = []
        for pred in grid_preds:
            restored = _restore_mask(pred, (H, W), cfg)
            if restored.any():
                out.append(InstancePrediction(mask=restored, category=pred.category,
                                              confidence=pred.confidence))
    return out
