"""Per-category archives: the top-k index images ranked by similarity between
their embeddings and a category's pooled prompt embedding."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .index import IndexDataset
from .prompts import CategoryPrompt


@dataclass
class Archive:
    category_name: str
    member_indices: list[int]       # into the index dataset, descending similarity
    k: int                          # requested retrieval depth
    similarities: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.member_indices)) != len(self.member_indices):
            raise ValueError(f"archive {self.category_name!r} has duplicate member indices")
        if self.similarities and len(self.similarities) != len(self.member_indices):
            raise ValueError("similarities and member_indices length mismatch")

    def __len__(self) -> int:
        return len(self.member_indices)


def build_archive(index: IndexDataset, prompt: CategoryPrompt, k: int) -> Archive:
    """Rank index rows by dot product with the prompt embedding and keep the
    top min(k, N). Ties break toward the lower index so reruns agree."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if index.dim != prompt.embedding.shape[0]:
        raise ValueError(
            f"index dimension {index.dim} != prompt embedding dimension "
            f"{prompt.embedding.shape[0]} for category {prompt.category_name!r}"
        )
    sims = index.embeddings.astype(np.float64) @ prompt.embedding.astype(np.float64)
    # lexsort: primary key is -similarity, secondary is the row index itself
    order = np.lexsort((np.arange(len(index)), -sims))
    top = order[: min(k, len(index))]
    return Archive(
        category_name=prompt.category_name,
        member_indices=[int(i) for i in top],
        k=k,
        similarities=[float(sims[i]) for i in top],
    )


def write_archive_manifest(archive: Archive, index: IndexDataset, path: str, config_hash: str = "") -> None:
    """Text manifest: header lines, then one `locator<TAB>similarity` per member."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"config_hash: {config_hash}\n")
        f.write(f"category: {archive.category_name}\n")
        f.write(f"k: {archive.k}\n")
        f.write(f"count: {len(archive)}\n")
        for idx, sim in zip(archive.member_indices, archive.similarities):
            f.write(f"{index.image_refs[idx]}\t{sim:.8f}\n")


def read_archive_manifest(path: str) -> dict:
    """Parse a manifest back into {category, k, count, config_hash, members:
    [(locator, similarity)]}."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    header: dict[str, str] = {}
    members: list[tuple[str, float]] = []
    for ln in lines:
        if not ln:
            continue
        if "\t" in ln:
            loc, sim = ln.split("\t")
            members.append((loc, float(sim)))
        else:
            key, _, value = ln.partition(":")
            header[key.strip()] = value.strip()
    for required in ("category", "k", "count"):
        if required not in header:
            raise ValueError(f"manifest {path} missing header field {required!r}")
    if int(header["count"]) != len(members):
        raise ValueError(
            f"manifest {path} declares {header['count']} members but lists {len(members)}"
        )
    return {
        "category": header["category"],
        "k": int(header["k"]),
        "count": int(header["count"]),
        "config_hash": header.get("config_hash", ""),
        "members": members,
    }
