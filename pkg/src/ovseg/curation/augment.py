"""Training-time augmentation.

Geometric transforms (flip, rescale, pad-then-crop) hit the image and the
instance map through the same index map, with nearest-neighbor resampling for
labels so no fractional ids appear. Photometric transforms (color jitter,
grayscale, blur) touch the image only.
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy import ndimage

from ..config import AugmentConfig
from .copy_paste import PseudoSample, compact_instances

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


def resize_image(image: np.ndarray, size_hw: tuple[int, int]) -> np.ndarray:
    """Bilinear uint8 resize."""
    h, w = size_hw
    im = Image.fromarray(image, mode="RGB")
    return np.asarray(im.resize((w, h), Image.BILINEAR), dtype=np.uint8)


def resize_nearest(arr: np.ndarray, size_hw: tuple[int, int]) -> np.ndarray:
    """Pixel-center nearest-neighbor resize via index gather. Gathering
    commutes with (arr == id), so per-instance masks transform exactly like
    the joint id map."""
    H, W = arr.shape[:2]
    h, w = size_hw
    rows = np.minimum((np.arange(h, dtype=np.float64) + 0.5) * H / h, H - 1).astype(np.int64)
    cols = np.minimum((np.arange(w, dtype=np.float64) + 0.5) * W / w, W - 1).astype(np.int64)
    return arr[rows][:, cols]


def gaussian_blur(image: np.ndarray, kernel: int) -> np.ndarray:
    """Gaussian blur with an odd kernel width; sigma follows the usual
    0.3*((k-1)/2 - 1) + 0.8 convention."""
    if kernel <= 1:
        return image
    sigma = 0.3 * ((kernel - 1) * 0.5 - 1.0) + 0.8
    radius = (kernel - 1) / 2.0
    out = np.empty_like(image, dtype=np.float32)
    for c in range(image.shape[2]):
        out[..., c] = ndimage.gaussian_filter(
            image[..., c].astype(np.float32), sigma=sigma, truncate=radius / sigma, mode="nearest"
        )
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def _to_gray(image_f: np.ndarray) -> np.ndarray:
    return image_f @ _LUMA


def apply_color_jitter(image: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """Brightness, contrast, saturation scaling by the three given factors."""
    f = image.astype(np.float32)
    f = f * factors[0]
    mean = float(_to_gray(f).mean())
    f = mean + (f - mean) * factors[1]
    gray = _to_gray(f)[..., None]
    f = gray + (f - gray) * factors[2]
    return np.clip(np.round(f), 0, 255).astype(np.uint8)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    gray = np.clip(np.round(_to_gray(image.astype(np.float32))), 0, 255).astype(np.uint8)
    return np.repeat(gray[..., None], 3, axis=2)


def _pad_to(image: np.ndarray, id_map: np.ndarray, min_h: int, min_w: int) -> tuple[np.ndarray, np.ndarray]:
    h, w = id_map.shape
    ph, pw = max(0, min_h - h), max(0, min_w - w)
    if ph == 0 and pw == 0:
        return image, id_map
    image = np.pad(image, ((0, ph), (0, pw), (0, 0)))
    id_map = np.pad(id_map, ((0, ph), (0, pw)))    # padding is background 0
    return image, id_map


def augment_arrays(
    image: np.ndarray,
    id_map: np.ndarray,
    rng: np.random.Generator,
    crop_size: int,
    cfg: AugmentConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Core augmentation on raw arrays; returns (image, id_map) at
    crop_size x crop_size."""
    if rng.random() < cfg.flip_prob:
        image = image[:, ::-1].copy()
        id_map = id_map[:, ::-1].copy()
    scale = float(rng.uniform(*cfg.scale_range))
    h, w = id_map.shape
    nh, nw = max(1, round(h * scale)), max(1, round(w * scale))
    if (nh, nw) != (h, w):
        image = resize_image(image, (nh, nw))
        id_map = resize_nearest(id_map, (nh, nw))
    image, id_map = _pad_to(image, id_map, crop_size, crop_size)
    H, W = id_map.shape
    oy = int(rng.integers(0, H - crop_size + 1))
    ox = int(rng.integers(0, W - crop_size + 1))
    image = image[oy : oy + crop_size, ox : ox + crop_size]
    id_map = id_map[oy : oy + crop_size, ox : ox + crop_size]
    if rng.random() < cfg.color_jitter_prob:
        factors = rng.uniform(0.6, 1.4, size=3)
        image = apply_color_jitter(image, factors)
    if rng.random() < cfg.grayscale_prob:
        image = to_grayscale(image)
    if rng.random() < cfg.blur_prob:
        kernel = int(round(cfg.blur_kernel_frac * min(id_map.shape)))
        if kernel % 2 == 0:
            kernel += 1
        image = gaussian_blur(image, kernel)
    return np.ascontiguousarray(image), np.ascontiguousarray(id_map)


def augment(sample: PseudoSample, rng: np.random.Generator, crop_size: int,
            cfg: AugmentConfig | None = None) -> PseudoSample:
    if cfg is None:
        cfg = AugmentConfig()
    image, id_map = augment_arrays(sample.image, sample.instance_map, rng, crop_size, cfg)
    id_map, cats = compact_instances(id_map, sample.instance_categories)
    out = PseudoSample(
        image=image,
        instance_map=id_map,
        instance_categories=cats,
        provenance=list(sample.provenance),
    )
    out.validate()
    return out


def make_augment_fn(crop_size: int, cfg: AugmentConfig):
    """Single-object (image, mask) augment hook for the copy-paste sampler."""

    def fn(image: np.ndarray, mask: np.ndarray, rng: np.random.Generator):
        img, id_map = augment_arrays(image, mask.astype(np.int32), rng, crop_size, cfg)
        return img, (id_map > 0).astype(np.uint8)

    return fn
