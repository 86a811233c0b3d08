"""Index dataset: a pool of unlabelled images with precomputed joint-space
embeddings, stored on disk as raw float32 rows plus a locator list."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

EMBEDDINGS_FILE = "embeddings.f32"
LOCATORS_FILE = "locators.txt"


@dataclass
class IndexDataset:
    embeddings: np.ndarray      # (N, d) float32, rows unit-norm
    image_refs: list[str]       # N opaque locators, resolved relative to a root dir

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float32)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] < 1:
            raise ValueError(f"embeddings must be a non-empty N x d array, got shape {self.embeddings.shape}")
        if len(self.image_refs) != self.embeddings.shape[0]:
            raise ValueError(
                f"{len(self.image_refs)} locators for {self.embeddings.shape[0]} embedding rows"
            )
        norms = np.linalg.norm(self.embeddings, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-5)
        if bad.size:
            raise ValueError(
                f"{bad.size} embedding rows are not unit-norm (first offender: row "
                f"{bad[0]}, norm {norms[bad[0]]:.6f})"
            )

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


def save_index(index: IndexDataset, root: str) -> None:
    """Write the embedding matrix (row-major, little-endian float32) and the
    locator list. Images themselves live wherever the locators point."""
    os.makedirs(root, exist_ok=True)
    index.embeddings.astype("<f4").tofile(os.path.join(root, EMBEDDINGS_FILE))
    with open(os.path.join(root, LOCATORS_FILE), "w", encoding="utf-8") as f:
        for ref in index.image_refs:
            if "\n" in ref:
                raise ValueError(f"locator may not contain a newline: {ref!r}")
            f.write(ref + "\n")


def load_index(root: str) -> IndexDataset:
    emb_path = os.path.join(root, EMBEDDINGS_FILE)
    loc_path = os.path.join(root, LOCATORS_FILE)
    for p in (emb_path, loc_path):
        if not os.path.exists(p):
            raise FileNotFoundError(f"index file missing: {p}")
    with open(loc_path, "r", encoding="utf-8") as f:
        refs = [line.rstrip("\n") for line in f if line.strip()]
    if not refs:
        raise ValueError(f"locator list is empty: {loc_path}")
    flat = np.fromfile(emb_path, dtype="<f4")
    if flat.size % len(refs) != 0:
        raise ValueError(
            f"embedding file holds {flat.size} floats, not divisible by "
            f"{len(refs)} locators: {emb_path}"
        )
    emb = flat.reshape(len(refs), flat.size // len(refs))
    return IndexDataset(embeddings=emb, image_refs=refs)


def load_image(root: str, locator: str) -> np.ndarray:
    """Resolve a locator against the index root and load as H x W x 3 uint8."""
    path = os.path.join(root, locator)
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
