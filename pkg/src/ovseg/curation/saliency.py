"""Saliency detection behind an interface.

Training-data curation only needs *some* source of category-agnostic object
masks. Two built-ins: an oracle that recognizes synthetic-corpus images by
content hash and returns their exact masks, and a loader for precomputed
masks on disk (the route for real images; the detector itself is external).
An all-zero mask is the discard signal, not an error.
"""

from __future__ import annotations

import hashlib
import os
from typing import Protocol

import numpy as np
from PIL import Image

from ..errors import DetectionError
from .shapes import ShapesCorpus


class SaliencyDetector(Protocol):
    def detect(self, image: np.ndarray, ref: str | None = None) -> np.ndarray:
        """Return a {0,1} uint8 mask with the image's spatial size."""
        ...


def _image_key(image: np.ndarray) -> str:
    h = hashlib.sha1()
    h.update(str(image.shape).encode())
    h.update(np.ascontiguousarray(image).tobytes())
    return h.hexdigest()


class ShapesOracleDetector:
    """Serves exact ground-truth masks for images it was built from, keyed by
    image content. Unknown images get an all-zero mask, which downstream
    treats as a discard."""

    def __init__(self, lookup: dict[str, np.ndarray]):
        self._lookup = lookup

    @classmethod
    def from_pairs(cls, images: list[np.ndarray], masks: list[np.ndarray]) -> "ShapesOracleDetector":
        if len(images) != len(masks):
            raise ValueError(f"{len(images)} images for {len(masks)} masks")
        return cls({_image_key(img): (m > 0).astype(np.uint8) for img, m in zip(images, masks)})

    @classmethod
    def from_corpus(cls, corpus: ShapesCorpus) -> "ShapesOracleDetector":
        return cls.from_pairs(corpus.images, corpus.masks)

    @classmethod
    def from_corpus_dir(cls, root: str) -> "ShapesOracleDetector":
        img_dir = os.path.join(root, "images")
        mask_dir = os.path.join(root, "gt_masks")
        images, masks = [], []
        for name in sorted(os.listdir(img_dir)):
            with Image.open(os.path.join(img_dir, name)) as im:
                images.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
            with Image.open(os.path.join(mask_dir, name)) as mm:
                masks.append((np.asarray(mm.convert("L")) > 127).astype(np.uint8))
        return cls.from_pairs(images, masks)

    def detect(self, image: np.ndarray, ref: str | None = None) -> np.ndarray:
        mask = self._lookup.get(_image_key(image))
        if mask is None:
            return np.zeros(image.shape[:2], dtype=np.uint8)
        return mask


class ExternalMaskLoader:
    """Adapter for masks produced by any external detector: looks up a mask
    file named like the image's locator basename and binarizes it at 127."""

    def __init__(self, mask_dir: str):
        self.mask_dir = mask_dir

    def detect(self, image: np.ndarray, ref: str | None = None) -> np.ndarray:
        if ref is None:
            raise DetectionError("external mask loader needs the image locator")
        path = os.path.join(self.mask_dir, os.path.basename(ref))
        if not os.path.exists(path):
            raise DetectionError(f"no precomputed mask for {ref!r} at {path}")
        with Image.open(path) as im:
            mask = (np.asarray(im.convert("L")) > 127).astype(np.uint8)
        return mask


def generate_pseudo_mask(image: np.ndarray, detector: SaliencyDetector, ref: str | None = None) -> np.ndarray:
    """Run the detector and enforce the output contract ({0,1} values, same
    spatial size). Detector exceptions surface as DetectionError."""
    if image.size == 0:
        raise ValueError("empty image")
    try:
        mask = detector.detect(image, ref=ref)
    except DetectionError:
        raise
    except Exception as exc:
        raise DetectionError(f"saliency detector failed on {ref!r}: {exc}") from exc
    mask = np.asarray(mask)
    if mask.shape != image.shape[:2]:
        raise DetectionError(
            f"detector returned mask of shape {mask.shape} for image {image.shape[:2]}"
        )
    uniq = np.unique(mask)
    if not np.isin(uniq, [0, 1]).all():
        raise DetectionError(f"mask values must be in {{0,1}}, got {uniq[:8]}")
    return mask.astype(np.uint8)
