"""Synthetic shapes corpus: a desk-scale stand-in for a web-scale unlabelled
image pool with joint-space embeddings.

Category is carried by geometry plus a category-keyed fill palette (one
saturated dominant channel each, with per-draw variation). A small
from-scratch encoder has no pretrained features to lean on, so the palette
plays the role that pretrained class-discriminative features play at full
scale; backgrounds stay mid-tone noise. Every image comes with its exact
object mask, which the oracle saliency detector serves back during curation.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .index import IndexDataset, save_index
from .prompts import TextEncoder

SHAPE_KINDS = ("circle", "square", "triangle", "cross")


def draw_shape_mask(category: str, canvas_size: int, rng: np.random.Generator,
                    min_frac: float = 0.15, max_frac: float = 0.35) -> np.ndarray:
    """Binary mask of one randomly sized/placed shape, fully inside the canvas."""
    if category not in SHAPE_KINDS:
        raise ValueError(f"unknown shape category {category!r}; known: {SHAPE_KINDS}")
    h = canvas_size
    half = rng.uniform(min_frac * h, max_frac * h)
    margin = int(np.ceil(half)) + 2
    if 2 * margin >= h:
        raise ValueError(f"canvas {h} too small for shape of half-size {half:.1f}")
    cy = rng.uniform(margin, h - margin)
    cx = rng.uniform(margin, h - margin)
    yy, xx = np.mgrid[0:h, 0:h]
    if category == "circle":
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= half**2
    elif category == "square":
        mask = (np.abs(yy - cy) <= half) & (np.abs(xx - cx) <= half)
    elif category == "triangle":
        # isoceles, apex up: width grows linearly from apex to base
        t = (yy - (cy - half)) / (2.0 * half)
        mask = (t >= 0.0) & (t <= 1.0) & (np.abs(xx - cx) <= t * half)
    else:  # cross
        arm = half / 3.0
        bar_h = (np.abs(yy - cy) <= arm) & (np.abs(xx - cx) <= half)
        bar_v = (np.abs(xx - cx) <= arm) & (np.abs(yy - cy) <= half)
        mask = bar_h | bar_v
    mask = mask.astype(np.uint8)
    if not mask.any():
        raise RuntimeError(f"degenerate draw for {category}: empty mask")
    return mask


def _noise_background(canvas_size: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth mid-tone noise: low-res RGB field upsampled bilinearly."""
    low = rng.uniform(60.0, 180.0, size=(8, 8, 3)).astype(np.float32)
    im = Image.fromarray(low.astype(np.uint8), mode="RGB")
    up = im.resize((canvas_size, canvas_size), Image.BILINEAR)
    return np.asarray(up, dtype=np.uint8)


# which RGB channels each category's fill saturates high; the rest stay low
_PALETTE: dict[str, tuple[int, ...]] = {
    "circle": (0,),       # red-dominant
    "square": (2,),       # blue-dominant
    "triangle": (1,),     # green-dominant
    "cross": (0, 1),      # yellow: red + green
}


def _shape_color(category: str, rng: np.random.Generator) -> np.ndarray:
    """Category-keyed fill: dominant channels high, others low, with enough
    per-draw spread that a single pixel value never identifies the class."""
    if category not in _PALETTE:
        raise ValueError(f"no palette for category {category!r}")
    color = rng.uniform(0.0, 90.0, size=3)
    for ch in _PALETTE[category]:
        color[ch] = rng.uniform(180.0, 255.0)
    return color.astype(np.uint8)


def render_shape_image(
    mask: np.ndarray, category: str, rng: np.random.Generator
) -> np.ndarray:
    bg = _noise_background(mask.shape[0], rng).astype(np.float32)
    color = _shape_color(category, rng).astype(np.float32)
    out = np.where(mask[..., None].astype(bool), color[None, None, :], bg)
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


@dataclass
class ShapesCorpus:
    images: list[np.ndarray]        # H x W x 3 uint8
    masks: list[np.ndarray]         # H x W uint8 in {0,1}
    labels: list[str]
    embeddings: np.ndarray          # (N, d) float32 unit rows


def make_shapes_dataset(
    num_images: int,
    categories: tuple[str, ...] = ("circle", "square", "triangle"),
    canvas_size: int = 64,
    rng: np.random.Generator | None = None,
    text_encoder: TextEncoder | None = None,
    embed_dim: int = 64,
    noise_sigma: float = 0.2,
) -> ShapesCorpus:
    """Single-object images with known masks, balanced over categories
    round-robin, plus unit-norm embeddings near each category's text vector."""
    if num_images < 1:
        raise ValueError(f"num_images must be >= 1, got {num_images}")
    if rng is None:
        rng = np.random.default_rng(0)
    if text_encoder is None:
        from .prompts import HashTextEncoder
        text_encoder = HashTextEncoder(dim=embed_dim)
    images, masks, labels = [], [], []
    embeddings = np.empty((num_images, text_encoder.dim), dtype=np.float32)
    for i in range(num_images):
        cat = categories[i % len(categories)]
        mask = draw_shape_mask(cat, canvas_size, rng)
        images.append(render_shape_image(mask, cat, rng))
        masks.append(mask)
        labels.append(cat)
        vec = text_encoder.encode(cat).astype(np.float64)
        vec = vec + noise_sigma * rng.standard_normal(vec.shape)
        embeddings[i] = (vec / np.linalg.norm(vec)).astype(np.float32)
    return ShapesCorpus(images=images, masks=masks, labels=labels, embeddings=embeddings)


def save_shapes_corpus(corpus: ShapesCorpus, root: str) -> IndexDataset:
    """Write an index-dataset directory plus a gt_masks/ sidecar dir used by
    the oracle saliency detector. Returns the in-memory index."""
    img_dir = os.path.join(root, "images")
    mask_dir = os.path.join(root, "gt_masks")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(mask_dir, exist_ok=True)
    refs = []
    for i, (img, mask) in enumerate(zip(corpus.images, corpus.masks)):
        name = f"img_{i:05d}.png"
        Image.fromarray(img, mode="RGB").save(os.path.join(img_dir, name))
        Image.fromarray((mask * 255).astype(np.uint8), mode="L").save(os.path.join(mask_dir, name))
        refs.append(os.path.join("images", name))
    index = IndexDataset(embeddings=corpus.embeddings, image_refs=refs)
    save_index(index, root)
    return index


@dataclass
class EvalScene:
    """A multi-object test image with exact instance and semantic ground truth."""

    image: np.ndarray                         # H x W x 3 uint8
    instance_map: np.ndarray                  # H x W int32, 0 background
    instance_categories: dict[int, str]

    def semantic_map(self, class_names: list[str]) -> np.ndarray:
        out = np.zeros(self.instance_map.shape, dtype=np.int64)
        for inst_id, cat in self.instance_categories.items():
            out[self.instance_map == inst_id] = class_names.index(cat)
        return out


def make_shapes_eval_set(
    num_scenes: int,
    categories: tuple[str, ...] = ("circle", "square", "triangle"),
    canvas_size: int = 64,
    rng: np.random.Generator | None = None,
    min_instances: int = 2,
    max_instances: int = 3,
    min_frac: float = 0.12,
    max_frac: float = 0.26,
) -> list[EvalScene]:
    """Scenes with several disjoint shapes each. Placement retries until the
    new shape is disjoint from the ones already placed."""
    if rng is None:
        rng = np.random.default_rng(0)
    scenes = []
    for _ in range(num_scenes):
        count = int(rng.integers(min_instances, max_instances + 1))
        bg = _noise_background(canvas_size, rng).astype(np.float32)
        occupied = np.zeros((canvas_size, canvas_size), dtype=bool)
        inst_map = np.zeros((canvas_size, canvas_size), dtype=np.int32)
        cats: dict[int, str] = {}
        next_id = 1
        for _ in range(count):
            cat = categories[int(rng.integers(len(categories)))]
            for _ in range(200):
                mask = draw_shape_mask(cat, canvas_size, rng, min_frac=min_frac, max_frac=max_frac)
                if not (mask.astype(bool) & occupied).any():
                    break
            else:
                continue    # crowded scene, skip this instance
            color = _shape_color(cat, rng).astype(np.float32)
            bg = np.where(mask[..., None].astype(bool), color[None, None, :], bg)
            occupied |= mask.astype(bool)
            inst_map[mask.astype(bool)] = next_id
            cats[next_id] = cat
            next_id += 1
        scenes.append(
            EvalScene(
                image=np.clip(np.round(bg), 0, 255).astype(np.uint8),
                instance_map=inst_map,
                instance_categories=cats,
            )
        )
    return scenes
