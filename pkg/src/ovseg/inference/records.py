"""Prediction persistence: run-length-encoded instance records, 16-bit
semantic label PNGs, and qualitative overlays."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
from PIL import Image

from .predict import InstancePrediction, SemanticPrediction


def encode_rle(mask: np.ndarray) -> dict:
    """Row-major RLE: alternating run lengths starting with background, so an
    all-foreground mask begins with a 0-length background run."""
    flat = np.asarray(mask).astype(bool).ravel()
    if flat.size == 0:
        runs = [0]
    else:
        changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], changes, [flat.size]))
        runs = np.diff(bounds).tolist()
        if flat[0]:   # starts in foreground: zero-length background run first
            runs = [0] + runs
    return {"height": int(mask.shape[0]), "width": int(mask.shape[1]), "runs": runs}


def decode_rle(rle: dict) -> np.ndarray:
    total = rle["height"] * rle["width"]
    if sum(rle["runs"]) != total:
        raise ValueError(f"run lengths sum to {sum(rle['runs'])}, expected {total}")
    flat = np.zeros(total, dtype=np.uint8)
    pos = 0
    value = 0
    for run in rle["runs"]:
        if run:
            flat[pos : pos + run] = value
        pos += run
        value = 1 - value
    return flat.reshape(rle["height"], rle["width"])


def write_prediction_records(
    path: str,
    per_image: dict[str, list[InstancePrediction]],
    category_names: list[str],
    config_hash: str = "",
) -> None:
    """One JSON line per instance, grouped by sorted image id; header line
    carries the config hash."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"record": "header", "config_hash": config_hash}) + "\n")
        for image_id in sorted(per_image):
            for pred in per_image[image_id]:
                rec = {
                    "image_id": image_id,
                    "category": category_names[pred.category],
                    "confidence": round(float(pred.confidence), 8),
                    "rle": encode_rle(pred.mask),
                }
                f.write(json.dumps(rec) + "\n")


def read_prediction_records(path: str) -> tuple[dict[str, list[dict]], str]:
    """Returns ({image_id: [record, ...]}, config_hash); each record keeps
    its decoded mask under 'mask'."""
    per_image: dict[str, list[dict]] = {}
    cfg_hash = ""
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("record") == "header":
                cfg_hash = rec.get("config_hash", "")
                continue
            rec["mask"] = decode_rle(rec["rle"])
            per_image.setdefault(rec["image_id"], []).append(rec)
    return per_image, cfg_hash


def write_semantic_png(path: str, prediction: SemanticPrediction) -> None:
    labels = prediction.labels
    if labels.min() < 0 or labels.max() > 65535:
        raise ValueError(f"labels out of 16-bit range: [{labels.min()}, {labels.max()}]")
    Image.fromarray(labels.astype(np.uint16)).save(path)


def read_semantic_png(path: str) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.uint16).astype(np.int64)


def category_color(name: str) -> tuple[int, int, int]:
    """Stable palette: three bytes of the name's digest, brightened so the
    overlay never blends to black."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return tuple(64 + (b % 192) for b in digest[:3])


def render_overlay(image: np.ndarray, predictions: list[InstancePrediction],
                   category_names: list[str], alpha: float = 0.5) -> np.ndarray:
    out = image.astype(np.float32).copy()
    for pred in predictions:
        color = np.array(category_color(category_names[pred.category]), dtype=np.float32)
        sel = pred.mask.astype(bool)
        out[sel] = (1 - alpha) * out[sel] + alpha * color
    return np.clip(np.round(out), 0, 255).astype(np.uint8)
