"""Pseudo-label store: one PNG image, one 16-bit instance-map PNG, and one
text sidecar (instance id -> category name) per sample."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .copy_paste import PseudoSample

IMAGE_SUFFIX = ".png"
INSTANCES_SUFFIX = "_instances.png"
CATEGORIES_SUFFIX = "_categories.txt"


def _png_info(config_hash: str) -> PngInfo | None:
    if not config_hash:
        return None
    info = PngInfo()
    info.add_text("config_hash", config_hash)
    return info


def save_labeled_image(
    root: str,
    stem: str,
    image: np.ndarray,
    instance_map: np.ndarray,
    id_to_name: dict[int, str],
    config_hash: str = "",
) -> None:
    os.makedirs(root, exist_ok=True)
    if instance_map.min() < 0 or instance_map.max() > 65535:
        raise ValueError(f"instance ids out of 16-bit range: [{instance_map.min()}, {instance_map.max()}]")
    for name in id_to_name.values():
        if "\t" in name or "\n" in name:
            raise ValueError(f"category name may not contain tab/newline: {name!r}")
    info = _png_info(config_hash)
    Image.fromarray(image, mode="RGB").save(os.path.join(root, stem + IMAGE_SUFFIX), pnginfo=info)
    Image.fromarray(instance_map.astype(np.uint16)).save(
        os.path.join(root, stem + INSTANCES_SUFFIX), pnginfo=info
    )
    with open(os.path.join(root, stem + CATEGORIES_SUFFIX), "w", encoding="utf-8") as f:
        if config_hash:
            f.write(f"# config_hash: {config_hash}\n")
        for inst_id in sorted(id_to_name):
            f.write(f"{inst_id}\t{id_to_name[inst_id]}\n")


def load_labeled_image(root: str, stem: str) -> tuple[np.ndarray, np.ndarray, dict[int, str]]:
    with Image.open(os.path.join(root, stem + IMAGE_SUFFIX)) as im:
        image = np.asarray(im.convert("RGB"), dtype=np.uint8)
    with Image.open(os.path.join(root, stem + INSTANCES_SUFFIX)) as im:
        instance_map = np.asarray(im, dtype=np.uint16).astype(np.int32)
    id_to_name: dict[int, str] = {}
    with open(os.path.join(root, stem + CATEGORIES_SUFFIX), "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            inst_id, _, name = line.partition("\t")
            id_to_name[int(inst_id)] = name
    return image, instance_map, id_to_name


def save_pseudo_sample(root: str, stem: str, sample: PseudoSample,
                       class_names: list[str], config_hash: str = "") -> None:
    id_to_name = {i: class_names[c] for i, c in sample.instance_categories.items()}
    save_labeled_image(root, stem, sample.image, sample.instance_map, id_to_name, config_hash)


def load_pseudo_sample(root: str, stem: str, class_names: list[str]) -> PseudoSample:
    image, instance_map, id_to_name = load_labeled_image(root, stem)
    cats = {}
    for inst_id, name in id_to_name.items():
        if name not in class_names:
            raise ValueError(f"{stem}: category {name!r} not in the run's class list")
        cats[inst_id] = class_names.index(name)
    sample = PseudoSample(image=image, instance_map=instance_map, instance_categories=cats)
    sample.validate()
    return sample


def list_stems(root: str) -> list[str]:
    stems = []
    for name in os.listdir(root):
        if name.endswith(INSTANCES_SUFFIX):
            stems.append(name[: -len(INSTANCES_SUFFIX)])
    return sorted(stems)
