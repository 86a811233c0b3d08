"""Category prompt encoding.

A category name is turned into a single unit-norm text embedding by filling it
into a set of prompt templates, encoding each sentence, averaging, and
re-normalizing. Averaging over many phrasings washes out wording-specific
directions and keeps the category-specific one.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..errors import DegeneratePromptError

# 80 generic photo-style prompts plus 5 scene-level prompts.
DEFAULT_TEMPLATES: tuple[str, ...] = (
    "a bad photo of a {}.",
    "a photo of many {}.",
    "a sculpture of a {}.",
    "a photo of the hard to see {}.",
    "a low resolution photo of the {}.",
    "a rendering of a {}.",
    "graffiti of a {}.",
    "a bad photo of the {}.",
    "a cropped photo of the {}.",
    "a tattoo of a {}.",
    "the embroidered {}.",
    "a photo of a hard to see {}.",
    "a bright photo of a {}.",
    "a photo of a clean {}.",
    "a photo of a dirty {}.",
    "a dark photo of the {}.",
    "a drawing of a {}.",
    "a photo of my {}.",
    "the plastic {}.",
    "a photo of the cool {}.",
    "a close-up photo of a {}.",
    "a black and white photo of the {}.",
    "a painting of the {}.",
    "a painting of a {}.",
    "a pixelated photo of the {}.",
    "a sculpture of the {}.",
    "a bright photo of the {}.",
    "a cropped photo of a {}.",
    "a plastic {}.",
    "a photo of the dirty {}.",
    "a jpeg corrupted photo of a {}.",
    "a blurry photo of the {}.",
    "a photo of the {}.",
    "a good photo of the {}.",
    "a rendering of the {}.",
    "a {} in a video game.",
    "a photo of one {}.",
    "a doodle of a {}.",
    "a close-up photo of the {}.",
    "a photo of a {}.",
    "the origami {}.",
    "the {} in a video game.",
    "a sketch of a {}.",
    "a doodle of the {}.",
    "a origami {}.",
    "a low resolution photo of a {}.",
    "the toy {}.",
    "a rendition of the {}.",
    "a photo of the clean {}.",
    "a photo of a large {}.",
    "a rendition of a {}.",
    "a photo of a nice {}.",
    "a photo of a weird {}.",
    "a blurry photo of a {}.",
    "a cartoon {}.",
    "art of a {}.",
    "a sketch of the {}.",
    "a embroidered {}.",
    "a pixelated photo of a {}.",
    "itap of the {}.",
    "a jpeg corrupted photo of the {}.",
    "a good photo of a {}.",
    "a plushie {}.",
    "a photo of the nice {}.",
    "a photo of the small {}.",
    "a photo of the weird {}.",
    "the cartoon {}.",
    "art of the {}.",
    "a drawing of the {}.",
    "a photo of the large {}.",
    "a black and white photo of a {}.",
    "the plushie {}.",
    "a dark photo of a {}.",
    "itap of a {}.",
    "graffiti of the {}.",
    "a toy {}.",
    "itap of my {}.",
    "a photo of a cool {}.",
    "a photo of a small {}.",
    "a tattoo of the {}.",
    "there is a {} in the scene.",
    "there is the {} in the scene.",
    "this is a {} in the scene.",
    "this is the {} in the scene.",
    "this is one {} in the scene.",
)


class TextEncoder(Protocol):
    dim: int

    def encode(self, text: str) -> np.ndarray: ...


class HashTextEncoder:
    """Deterministic stand-in for a learned text encoder.

    Each word gets a fixed random direction derived from a content hash of the
    word (never the interpreter's salted hash), so the same word always maps
    to the same vector on every platform and process. A sentence embedding is
    the normalized sum of its word vectors, which makes sentences sharing a
    category word cluster around that word's direction.
    """

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _word_vector(self, word: str) -> np.ndarray:
        vec = self._cache.get(word)
        if vec is None:
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            key = int.from_bytes(digest[:8], "little")
            rng = np.random.Generator(np.random.PCG64([self.seed, key]))
            vec = rng.standard_normal(self.dim).astype(np.float64)
            self._cache[word] = vec
        return vec

    @staticmethod
    def _tokenize(text: str) -> list[str]:
        out, cur = [], []
        for ch in text.lower():
            if ch.isalnum():
                cur.append(ch)
            elif cur:
                out.append("".join(cur))
                cur = []
        if cur:
            out.append("".join(cur))
        return out

    def encode(self, text: str) -> np.ndarray:
        words = self._tokenize(text)
        if not words:
            raise ValueError(f"cannot encode empty text: {text!r}")
        total = np.zeros(self.dim, dtype=np.float64)
        for w in words:
            total += self._word_vector(w)
        norm = float(np.linalg.norm(total))
        if norm < 1e-8:
            raise ValueError(f"text embedding collapsed to zero for {text!r}")
        return (total / norm).astype(np.float32)


@dataclass(frozen=True)
class CategoryPrompt:
    """A category name with its prompt templates and pooled text embedding."""

    category_name: str
    templates: tuple[str, ...]
    embedding: np.ndarray   # unit-norm, shape (e_t,)


def encode_category_prompts(
    category_name: str,
    templates: list[str] | tuple[str, ...],
    text_encoder: TextEncoder,
) -> CategoryPrompt:
    """Average per-template sentence embeddings and re-normalize.

    Raises DegeneratePromptError when the templates cancel out (mean norm
    below 1e-8): a zero vector has no direction to compare against.
    """
    if not templates:
        raise ValueError(f"templates must be non-empty for category {category_name!r}")
    vecs = [np.asarray(text_encoder.encode(t.format(category_name)), dtype=np.float64) for t in templates]
    mean = np.mean(vecs, axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < 1e-8:
        raise DegeneratePromptError(
            f"prompt embeddings for {category_name!r} average to (near) zero; "
            f"mean norm {norm:.3e}"
        )
    embedding = (mean / norm).astype(np.float32)
    return CategoryPrompt(category_name=category_name, templates=tuple(templates), embedding=embedding)
