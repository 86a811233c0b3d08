"""Copy-paste synthesis: composite single-object sources into multi-instance
training images with exact instance maps.

Later pastes occlude earlier ones. Instances that end up fully hidden are
dropped and the surviving ids re-compacted to 1..n, so every id present in
the map has pixels and a category.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# (image H x W x 3 uint8, binary mask H x W, category index >= 1)
Source = tuple[np.ndarray, np.ndarray, int]


@dataclass
class PseudoSample:
    image: np.ndarray                       # H x W x 3 uint8
    instance_map: np.ndarray                # H x W int32, 0 = background
    instance_categories: dict[int, int]     # instance id -> class index (>= 1)
    provenance: list[str] = field(default_factory=list)   # archive names, paste order

    def validate(self) -> None:
        ids = np.unique(self.instance_map)
        ids = ids[ids != 0]
        expected = set(range(1, len(ids) + 1))
        if set(int(i) for i in ids) != expected:
            raise ValueError(f"instance ids not contiguous 1..n: {sorted(int(i) for i in ids)}")
        if set(self.instance_categories) != expected:
            raise ValueError(
                f"instance_categories keys {sorted(self.instance_categories)} "
                f"!= map ids {sorted(expected)}"
            )
        if self.image.shape[:2] != self.instance_map.shape:
            raise ValueError(
                f"image {self.image.shape[:2]} vs instance_map {self.instance_map.shape}"
            )

    def num_instances(self) -> int:
        return len(self.instance_categories)


def compact_instances(instance_map: np.ndarray, instance_categories: dict[int, int]) -> tuple[np.ndarray, dict[int, int]]:
    """Drop ids with no pixels and relabel survivors 1..n in ascending old-id
    order."""
    present = [int(i) for i in np.unique(instance_map) if i != 0]
    out = np.zeros_like(instance_map)
    cats: dict[int, int] = {}
    for new_id, old_id in enumerate(sorted(present), start=1):
        out[instance_map == old_id] = new_id
        cats[new_id] = instance_categories[old_id]
    return out, cats


def _shifted_mask(mask: np.ndarray, dy: int, dx: int, canvas_hw: tuple[int, int]) -> np.ndarray:
    """Mask translated by (dy, dx) onto a canvas, clipped at the borders."""
    H, W = canvas_hw
    h, w = mask.shape
    out = np.zeros((H, W), dtype=bool)
    ys0, ys1 = max(0, -dy), min(h, H - dy)
    xs0, xs1 = max(0, -dx), min(w, W - dx)
    if ys0 < ys1 and xs0 < xs1:
        out[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx] = mask[ys0:ys1, xs0:xs1].astype(bool)
    return out


def _shifted_image(image: np.ndarray, dy: int, dx: int, canvas_hw: tuple[int, int]) -> np.ndarray:
    H, W = canvas_hw
    h, w = image.shape[:2]
    out = np.zeros((H, W, image.shape[2]), dtype=image.dtype)
    ys0, ys1 = max(0, -dy), min(h, H - dy)
    xs0, xs1 = max(0, -dx), min(w, W - dx)
    if ys0 < ys1 and xs0 < xs1:
        out[ys0 + dy : ys1 + dy, xs0 + dx : xs1 + dx] = image[ys0:ys1, xs0:xs1]
    return out


def _draw_offset(mask: np.ndarray, canvas_hw: tuple[int, int], rng: np.random.Generator,
                 min_visible: float = 0.5, tries: int = 100) -> tuple[int, int]:
    """Uniform offset that keeps at least `min_visible` of the mask on the
    canvas; falls back to (0, 0) when rejection sampling runs dry."""
    H, W = canvas_hw
    area = int(mask.sum())
    for _ in range(tries):
        dy = int(rng.integers(-mask.shape[0] + 1, H))
        dx = int(rng.integers(-mask.shape[1] + 1, W))
        if _shifted_mask(mask, dy, dx, canvas_hw).sum() >= min_visible * area:
            return dy, dx
    return 0, 0


def compose_copy_paste(
    sources: list[Source],
    canvas_size: int,
    rng: np.random.Generator,
    provenance: list[str] | None = None,
    max_sources: int = 10,
) -> PseudoSample:
    """Paste sources in order onto a canvas that starts as the first source's
    image. The first object keeps its position; each later one lands at a
    random offset that keeps at least half its mask visible."""
    if not sources:
        raise ValueError("compose_copy_paste needs at least one source")
    if len(sources) > max_sources:
        raise ValueError(f"{len(sources)} sources exceeds the maximum of {max_sources}")
    canvas_hw = (canvas_size, canvas_size)
    first_img, first_mask, first_cat = sources[0]
    if first_img.shape[:2] != canvas_hw:
        raise ValueError(
            f"sources must match the canvas size {canvas_hw}, first is {first_img.shape[:2]}"
        )
    canvas = first_img.copy()
    inst_map = np.zeros(canvas_hw, dtype=np.int32)
    inst_map[first_mask.astype(bool)] = 1
    cats = {1: int(first_cat)}
    for i, (img, mask, cat) in enumerate(sources[1:], start=2):
        if img.shape[:2] != canvas_hw:
            raise ValueError(f"source {i} has shape {img.shape[:2]}, expected {canvas_hw}")
        if not mask.any():
            raise ValueError(f"source {i} has an empty mask")
        dy, dx = _draw_offset(mask.astype(bool), canvas_hw, rng)
        placed = _shifted_mask(mask.astype(bool), dy, dx, canvas_hw)
        shifted_img = _shifted_image(img, dy, dx, canvas_hw)
        canvas[placed] = shifted_img[placed]
        inst_map[placed] = i          # later paste wins the overlap
        cats[i] = int(cat)
    inst_map, cats = compact_instances(inst_map, cats)
    sample = PseudoSample(
        image=canvas,
        instance_map=inst_map,
        instance_categories=cats,
        provenance=list(provenance) if provenance is not None else [],
    )
    sample.validate()
    return sample


@dataclass
class ArchivePool:
    """One archive's usable members: images whose pseudo-mask is non-empty."""

    name: str
    category_index: int
    images: list[np.ndarray]
    masks: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.images)


# augment hook: (image, mask, rng) -> (image, mask) at canvas size
AugmentFn = Callable[[np.ndarray, np.ndarray, np.random.Generator], tuple[np.ndarray, np.ndarray]]


def sample_copy_paste_batch(
    pools: list[ArchivePool],
    canvas_size: int,
    rng: np.random.Generator,
    same_archive_prob: float = 0.5,
    max_sources: int = 10,
    augment_fn: AugmentFn | None = None,
) -> PseudoSample:
    """Draw one synthetic training sample.

    With probability `same_archive_prob` every source comes from one randomly
    chosen archive (distinct members); otherwise each source's archive is
    chosen independently, with replacement. The source count is uniform on
    [1, max_sources] either way. Sources are augmented individually before
    composition.
    """
    usable = [p for p in pools if len(p) > 0]
    for p in pools:
        if len(p) == 0:
            warnings.warn(f"archive {p.name!r} has no usable pseudo-masks; skipping", stacklevel=2)
    if not usable:
        raise ValueError("no archive has usable pseudo-masks")
    same_archive = bool(rng.random() < same_archive_prob)
    count = int(rng.integers(1, max_sources + 1))
    picks: list[tuple[ArchivePool, int]] = []
    if same_archive:
        pool = usable[int(rng.integers(len(usable)))]
        count = min(count, len(pool))
        members = rng.choice(len(pool), size=count, replace=False)
        picks = [(pool, int(m)) for m in members]
    else:
        for _ in range(count):
            pool = usable[int(rng.integers(len(usable)))]
            picks.append((pool, int(rng.integers(len(pool)))))
    sources: list[Source] = []
    provenance: list[str] = []
    for pool, m in picks:
        img, mask = pool.images[m], pool.masks[m]
        if augment_fn is not None:
            ok = False
            for _ in range(20):
                a_img, a_mask = augment_fn(img, mask, rng)
                if a_mask.any():   # augmentation can crop the object away
                    ok = True
                    break
            if not ok:
                continue
            img, mask = a_img, a_mask
        sources.append((img, mask, pool.category_index))
        provenance.append(pool.name)
    if not sources:
        # every pick degenerated under augmentation; fall back to the first
        # pick unaugmented so the sampler always yields a sample
        pool, m = picks[0]
        sources = [(pool.images[m], pool.masks[m], pool.category_index)]
        provenance = [pool.name]
    return compose_copy_paste(sources, canvas_size, rng, provenance=provenance, max_sources=max_sources)
