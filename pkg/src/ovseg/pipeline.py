"""End-to-end orchestration: corpus generation, archive building,
pseudo-labelling, training, prediction, evaluation and ablations, all rooted
in one run directory and stamped with the config hash."""

from __future__ import annotations

import dataclasses
import json
import os
import warnings

import numpy as np

from .config import RunConfig, config_hash
from .curation.archives import Archive, build_archive, read_archive_manifest, write_archive_manifest
from .curation.augment import make_augment_fn
from .curation.copy_paste import ArchivePool, PseudoSample, sample_copy_paste_batch
from .curation.index import IndexDataset, load_image, load_index
from .curation.prompts import DEFAULT_TEMPLATES, HashTextEncoder, encode_category_prompts
from .curation.saliency import ExternalMaskLoader, SaliencyDetector, ShapesOracleDetector, generate_pseudo_mask
from .curation.shapes import make_shapes_dataset, make_shapes_eval_set, save_shapes_corpus
from .curation.store import list_stems, load_labeled_image, load_pseudo_sample, save_labeled_image, save_pseudo_sample
from .errors import ConfigError, DetectionError, EvaluationError
from .inference.predict import predict_instances, predict_semantic
from .inference.records import (
    read_prediction_records,
    render_overlay,
    write_prediction_records,
    write_semantic_png,
)
from .model.checkpoint import load_checkpoint, restore_segmenter
from .model.segmenter import build_segmenter
from .model.text_bank import TextBank, build_text_bank, extend_text_bank
from .training.trainer import TrainResult, train


def _templates(cfg: RunConfig) -> tuple[str, ...]:
    return tuple(cfg.templates) if cfg.templates else DEFAULT_TEMPLATES


def _joint_text_encoder(cfg: RunConfig) -> HashTextEncoder:
    return HashTextEncoder(dim=cfg.model.joint_dim, seed=cfg.model.text_seed)


def _bank_text_encoder(cfg: RunConfig) -> HashTextEncoder:
    return HashTextEncoder(dim=cfg.model.e_t, seed=cfg.model.text_seed)


def _index_root(cfg: RunConfig, run_dir: str) -> str:
    return cfg.data.index_dir or os.path.join(run_dir, "index")


def make_text_bank(cfg: RunConfig, extra_categories: list[str] | None = None) -> TextBank:
    bank = build_text_bank(cfg.class_names, _bank_text_encoder(cfg), _templates(cfg))
    if extra_categories:
        bank = extend_text_bank(bank, list(extra_categories), _bank_text_encoder(cfg), _templates(cfg))
    return bank


def run_make_corpus(cfg: RunConfig, run_dir: str) -> IndexDataset:
    """Generate the synthetic single-object corpus plus a held-out
    multi-instance eval set, both seeded from the run seed."""
    corpus = make_shapes_dataset(
        num_images=cfg.data.num_index_images,
        categories=tuple(cfg.categories),
        canvas_size=cfg.data.canvas_size,
        rng=np.random.default_rng([cfg.seed, 1]),
        text_encoder=_joint_text_encoder(cfg),
    )
    index = save_shapes_corpus(corpus, _index_root(cfg, run_dir))
    scenes = make_shapes_eval_set(
        num_scenes=cfg.data.num_eval_scenes,
        categories=tuple(cfg.categories),
        canvas_size=cfg.data.canvas_size,
        rng=np.random.default_rng([cfg.seed, 2]),
    )
    eval_dir = os.path.join(run_dir, "eval")
    for i, scene in enumerate(scenes):
        save_labeled_image(
            eval_dir, f"scene_{i:05d}", scene.image, scene.instance_map,
            scene.instance_categories, config_hash(cfg),
        )
    return index


def run_build_archives(cfg: RunConfig, run_dir: str) -> dict:
    """One manifest per category under <run_dir>/archives."""
    root = _index_root(cfg, run_dir)
    index = load_index(root)
    encoder = _joint_text_encoder(cfg)
    out_dir = os.path.join(run_dir, "archives")
    os.makedirs(out_dir, exist_ok=True)
    if cfg.data.archive_k > len(index):
        warnings.warn(
            f"archive_k={cfg.data.archive_k} exceeds corpus size {len(index)}; "
            f"archives will hold {len(index)} members"
        )
    summary = {}
    for cat in cfg.categories:
        prompt = encode_category_prompts(cat, _templates(cfg), encoder)
        archive = build_archive(index, prompt, cfg.data.archive_k)
        write_archive_manifest(archive, index, os.path.join(out_dir, f"{cat}.txt"), config_hash(cfg))
        summary[cat] = {
            "count": len(archive),
            "sim_max": archive.similarities[0],
            "sim_min": archive.similarities[-1],
        }
    return summary


def _default_detector(cfg: RunConfig, index_root: str) -> SaliencyDetector:
    if cfg.data.mask_dir:
        return ExternalMaskLoader(cfg.data.mask_dir)
    gt_dir = os.path.join(index_root, "gt_masks")
    if os.path.isdir(gt_dir):
        return ShapesOracleDetector.from_corpus_dir(index_root)
    raise ConfigError(
        "no saliency source: set data.mask_dir for precomputed masks or use a "
        "synthetic corpus with gt_masks/"
    )


def run_make_pseudo_labels(cfg: RunConfig, run_dir: str,
                           detector: SaliencyDetector | None = None) -> dict:
    """Run saliency over every archive member and persist non-empty masks as
    single-object pseudo-samples."""
    root = _index_root(cfg, run_dir)
    archive_dir = os.path.join(run_dir, "archives")
    store_dir = os.path.join(run_dir, "pseudo_labels")
    os.makedirs(store_dir, exist_ok=True)
    if detector is None:
        detector = _default_detector(cfg, root)
    class_names = cfg.class_names
    summary: dict[str, dict] = {}
    for cat in cfg.categories:
        manifest = read_archive_manifest(os.path.join(archive_dir, f"{cat}.txt"))
        kept = discarded = failed = 0
        failures: list[str] = []
        for rank, (locator, _sim) in enumerate(manifest["members"]):
            image = load_image(root, locator)
            try:
                mask = generate_pseudo_mask(image, detector, ref=locator)
            except DetectionError as exc:
                failed += 1
                failures.append(str(exc))
                continue
            if not mask.any():
                discarded += 1
                continue
            sample = PseudoSample(
                image=image,
                instance_map=mask.astype(np.int32),
                instance_categories={1: class_names.index(cat)},
                provenance=[cat],
            )
            save_pseudo_sample(store_dir, f"{cat}_{rank:05d}", sample, class_names, config_hash(cfg))
            kept += 1
        summary[cat] = {"kept": kept, "discarded": discarded, "failed": failed}
        for msg in failures:
            warnings.warn(f"pseudo-labelling skip: {msg}")
    with open(os.path.join(store_dir, "pseudo_summary.txt"), "w", encoding="utf-8") as f:
        f.write(f"config_hash: {config_hash(cfg)}\n")
        for cat in cfg.categories:
            s = summary[cat]
            f.write(f"{cat}\tkept={s['kept']}\tdiscarded={s['discarded']}\tfailed={s['failed']}\n")
    return summary


def load_archive_pools(cfg: RunConfig, run_dir: str) -> list[ArchivePool]:
    store_dir = os.path.join(run_dir, "pseudo_labels")
    class_names = cfg.class_names
    pools = []
    for cat in cfg.categories:
        images, masks = [], []
        for stem in list_stems(store_dir):
            if not stem.startswith(f"{cat}_"):
                continue
            sample = load_pseudo_sample(store_dir, stem, class_names)
            images.append(sample.image)
            masks.append((sample.instance_map > 0).astype(np.uint8))
        pools.append(ArchivePool(
            name=cat, category_index=class_names.index(cat), images=images, masks=masks,
        ))
    return pools


def make_sample_fn(cfg: RunConfig, pools: list[ArchivePool]):
    """Training sample source: copy-paste composites, or augmented
    single-object samples when copy-paste is ablated away."""
    crop = cfg.model.crop_size
    augment_fn = make_augment_fn(crop, cfg.augment)
    usable = [p for p in pools if len(p) > 0]
    if not usable:
        raise ConfigError("every archive pool is empty; nothing to train on")

    if cfg.training.use_copy_paste:
        def sample_fn(rng: np.random.Generator) -> PseudoSample:
            return sample_copy_paste_batch(
                usable, crop, rng,
                same_archive_prob=cfg.data.same_archive_prob,
                max_sources=cfg.data.max_paste_sources,
                augment_fn=augment_fn,
            )
        return sample_fn

    def sample_fn(rng: np.random.Generator) -> PseudoSample:
        pool = usable[int(rng.integers(len(usable)))]
        m = int(rng.integers(len(pool)))
        image, mask = pool.images[m], pool.masks[m]
        for _ in range(20):
            img, amask = augment_fn(image, mask, rng)
            if amask.any():
                return PseudoSample(
                    image=img, instance_map=amask.astype(np.int32),
                    instance_categories={1: pool.category_index}, provenance=[pool.name],
                )
        return PseudoSample(
            image=image, instance_map=mask.astype(np.int32),
            instance_categories={1: pool.category_index}, provenance=[pool.name],
        )
    return sample_fn


def run_train(cfg: RunConfig, run_dir: str, resume_from: str | None = None) -> TrainResult:
    pools = load_archive_pools(cfg, run_dir)
    bank = make_text_bank(cfg)
    model = build_segmenter(cfg)
    sample_fn = make_sample_fn(cfg, pools)
    return train(cfg, model, bank, sample_fn, os.path.join(run_dir, "train"),
                 resume_from=resume_from)


def _model_config_diff(stored: dict, current: dict) -> list[str]:
    keys = sorted(set(stored) | set(current))
    return [
        f"model.{k}: checkpoint={stored.get(k)!r} config={current.get(k)!r}"
        for k in keys if stored.get(k) != current.get(k)
    ]


def run_predict(
    cfg: RunConfig,
    run_dir: str,
    checkpoint_path: str | None = None,
    image_dir: str | None = None,
    extra_categories: list[str] | None = None,
    write_overlays: bool = False,
) -> str:
    """Predict semantic maps and instance records for every eval image.
    Returns the prediction records path."""
    checkpoint_path = checkpoint_path or os.path.join(run_dir, "train", "checkpoint_final.pt")
    payload = load_checkpoint(checkpoint_path)
    stored_model_cfg = payload["config"]["model"]
    current_model_cfg = dataclasses.asdict(cfg.model)
    diff = _model_config_diff(stored_model_cfg, current_model_cfg)
    if diff:
        raise ConfigError(
            "checkpoint/config model mismatch, refusing to load:\n  " + "\n  ".join(diff)
        )
    model, _ = restore_segmenter(payload)
    bank = make_text_bank(cfg, extra_categories)
    device = cfg.resolved_device()
    model.to(device)

    eval_dir = image_dir or os.path.join(run_dir, "eval")
    pred_dir = os.path.join(run_dir, "predictions")
    sem_dir = os.path.join(pred_dir, "semantic")
    os.makedirs(sem_dir, exist_ok=True)
    if write_overlays:
        os.makedirs(os.path.join(pred_dir, "overlays"), exist_ok=True)

    stems = list_stems(eval_dir)
    if not stems:
        # bare image directory (no instance sidecars): take the PNGs themselves
        stems = sorted(os.path.splitext(n)[0] for n in os.listdir(eval_dir) if n.endswith(".png"))
    per_image = {}
    from PIL import Image as PILImage
    for stem in stems:
        with PILImage.open(os.path.join(eval_dir, stem + ".png")) as im:
            image = np.asarray(im.convert("RGB"), dtype=np.uint8)
        sem = predict_semantic(image, model, bank, cfg.inference, device=device)
        write_semantic_png(os.path.join(sem_dir, stem + ".png"), sem)
        preds = predict_instances(image, model, bank, cfg.inference, device=device)
        per_image[stem] = preds
        if write_overlays:
            overlay = render_overlay(image, preds, bank.category_names)
            PILImage.fromarray(overlay, mode="RGB").save(
                os.path.join(pred_dir, "overlays", stem + ".png")
            )
    records_path = os.path.join(pred_dir, "records.jsonl")
    write_prediction_records(records_path, per_image, bank.category_names, config_hash(cfg))
    return records_path


def _load_eval_scenes(eval_dir: str) -> dict[str, tuple[np.ndarray, np.ndarray, dict[int, str]]]:
    scenes = {}
    for stem in list_stems(eval_dir):
        scenes[stem] = load_labeled_image(eval_dir, stem)
    return scenes


def run_evaluate(
    cfg: RunConfig,
    run_dir: str,
    records_path: str | None = None,
    eval_dir: str | None = None,
    mode: str | None = None,
    extra_categories: list[str] | None = None,
) -> dict[str, float]:
    """Score predictions against the eval scenes; write metrics.txt."""
    from .evaluation.mask_ap import compute_mask_ap
    from .evaluation.miou import compute_miou
    from .inference.records import read_semantic_png

    records_path = records_path or os.path.join(run_dir, "predictions", "records.jsonl")
    eval_dir = eval_dir or os.path.join(run_dir, "eval")
    mode = mode or cfg.evaluation.mode
    scenes = _load_eval_scenes(eval_dir)
    if not scenes:
        raise EvaluationError(f"no eval scenes found in {eval_dir}")
    per_image, _rec_hash = read_prediction_records(records_path)
    unknown = sorted(set(per_image) - set(scenes))
    if unknown:
        raise EvaluationError(f"predictions reference unknown image ids: {unknown}")

    class_names = list(cfg.class_names)
    for name in extra_categories or []:
        if name not in class_names:
            class_names.append(name)
    sem_dir = os.path.join(os.path.dirname(records_path), "semantic")
    sem_preds, sem_gts = [], []
    gts_by_image = {}
    for stem in sorted(scenes):
        image, inst_map, id_to_name = scenes[stem]
        sem_path = os.path.join(sem_dir, stem + ".png")
        if not os.path.exists(sem_path):
            raise EvaluationError(f"missing semantic prediction for image id {stem}")
        sem_preds.append(read_semantic_png(sem_path))
        gt_sem = np.zeros(inst_map.shape, dtype=np.int64)
        gt_instances = []
        for inst_id, name in id_to_name.items():
            m = inst_map == inst_id
            if name not in class_names:
                raise EvaluationError(f"gt category {name!r} not in the class list")
            gt_sem[m] = class_names.index(name)
            gt_instances.append((m.astype(np.uint8), name))
        sem_gts.append(gt_sem)
        gts_by_image[stem] = gt_instances

    preds_by_image = {
        stem: [(rec["mask"], rec["category"], rec["confidence"]) for rec in per_image.get(stem, [])]
        for stem in sorted(scenes)
    }

    metrics: dict[str, float] = {}
    sem_result = compute_miou(sem_preds, sem_gts, num_classes=len(class_names))
    metrics["miou"] = sem_result.miou
    for c, iou in enumerate(sem_result.per_class_iou):
        if iou is not None:
            metrics[f"iou_{class_names[c]}"] = iou
    modes = ["class_aware", "class_agnostic"] if mode == "both" else [mode]
    for m in modes:
        det = compute_mask_ap(preds_by_image, gts_by_image, mode=m)
        prefix = "ap" if m == "class_aware" else "ap_agnostic"
        metrics[f"{prefix}"] = det.ap
        metrics[f"{prefix}50"] = det.ap50
        metrics[f"{prefix}75"] = det.ap75

    report_path = os.path.join(run_dir, "metrics.txt")
    with open(report_path, "w", encoding="utf-8") as f:
        f.write(f"config_hash={config_hash(cfg)}\n")
        for key in sorted(metrics):
            f.write(f"{key}={metrics[key]:.6f}\n")
    return metrics


def run_demo(cfg: RunConfig, run_dir: str, write_overlays: bool = True) -> dict[str, float]:
    """The whole pipeline on the synthetic benchmark, one call."""
    os.makedirs(run_dir, exist_ok=True)
    run_make_corpus(cfg, run_dir)
    run_build_archives(cfg, run_dir)
    run_make_pseudo_labels(cfg, run_dir)
    run_train(cfg, run_dir)
    run_predict(cfg, run_dir, write_overlays=write_overlays)
    return run_evaluate(cfg, run_dir)


def run_ablate(cfg: RunConfig, run_dir: str, axis: str) -> list[dict]:
    """Paired runs differing only on one axis; returns and persists the
    comparison table."""
    os.makedirs(run_dir, exist_ok=True)
    rows: list[dict] = []

    def _subrun(subcfg: RunConfig, name: str, *, reuse_data_from: str | None = None) -> str:
        sub_dir = os.path.join(run_dir, name)
        os.makedirs(sub_dir, exist_ok=True)
        if reuse_data_from is None:
            run_make_corpus(subcfg, sub_dir)
            run_build_archives(subcfg, sub_dir)
            run_make_pseudo_labels(subcfg, sub_dir)
        else:
            for sub in ("index", "eval", "archives", "pseudo_labels"):
                src = os.path.join(reuse_data_from, sub)
                dst = os.path.join(sub_dir, sub)
                if not os.path.exists(dst):
                    os.symlink(os.path.abspath(src), dst)
        run_train(subcfg, sub_dir)
        return sub_dir

    if axis == "stop_grad":
        for flag in (False, True):
            sub = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, stop_grad=flag))
            sub_dir = _subrun(sub, f"stop_grad_{'on' if flag else 'off'}",
                              reuse_data_from=None if not rows else os.path.join(run_dir, "stop_grad_off"))
            run_predict(sub, sub_dir)
            m = run_evaluate(sub, sub_dir)
            rows.append({"stop_grad": flag, "ap_agnostic50": m["ap_agnostic50"], "ap50": m["ap50"],
                         "ap_agnostic": m["ap_agnostic"], "ap": m["ap"]})
    elif axis == "nms":
        base_dir = _subrun(cfg, "nms_base")
        for flag in (False, True):
            sub = dataclasses.replace(cfg, inference=dataclasses.replace(cfg.inference, apply_nms=flag))
            run_predict(sub, base_dir)
            m = run_evaluate(sub, base_dir)
            rows.append({"nms": flag, "ap50": m["ap50"], "ap": m["ap"]})
    elif axis == "copy_paste":
        for flag in (False, True):
            sub = dataclasses.replace(cfg, training=dataclasses.replace(cfg.training, use_copy_paste=flag))
            sub_dir = _subrun(sub, f"copy_paste_{'on' if flag else 'off'}",
                              reuse_data_from=None if not rows else os.path.join(run_dir, "copy_paste_off"))
            run_predict(sub, sub_dir)
            m = run_evaluate(sub, sub_dir)
            rows.append({"copy_paste": flag, "miou": m["miou"], "ap50": m["ap50"]})
    elif axis == "temperature":
        base_dir = _subrun(cfg, "temperature_base")
        for tau in (0.1, 0.5, 1.0, 5.0, 10.0):
            sub = dataclasses.replace(cfg, inference=dataclasses.replace(cfg.inference, temperature=tau))
            run_predict(sub, base_dir)
            m = run_evaluate(sub, base_dir)
            rows.append({"temperature": tau, "ap50": m["ap50"], "ap": m["ap"]})
    else:
        raise ConfigError(f"unknown ablation axis {axis!r}")

    table_path = os.path.join(run_dir, f"ablation_{axis}.txt")
    with open(table_path, "w", encoding="utf-8") as f:
        f.write(f"config_hash={config_hash(cfg)}\n")
        for row in rows:
            f.write(json.dumps(row) + "\n")
    return rows
