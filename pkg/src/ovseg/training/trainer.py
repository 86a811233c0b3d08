"""The optimization loop: AdamW with a smaller encoder learning rate, poly
learning-rate decay, gradient clipping, JSONL loss logs and periodic
checkpoints."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch

from ..config import RunConfig, config_hash
from ..curation.augment import resize_nearest
from ..curation.copy_paste import PseudoSample
from ..errors import TrainingDiverged
from ..model.checkpoint import load_checkpoint, save_checkpoint
from ..model.segmenter import Segmenter
from ..model.text_bank import TextBank
from .losses import proposal_mask_losses, semantic_ce_loss, total_loss
from .matching import hungarian_match, matching_cost

SampleFn = Callable[[np.random.Generator], PseudoSample]


@dataclass
class TrainResult:
    checkpoint_path: str
    log_path: str
    iterations: int


def poly_lr_factor(iteration: int, max_iterations: int, power: float = 0.9) -> float:
    return max(0.0, 1.0 - iteration / max_iterations) ** power


def build_optimizer(model: Segmenter, cfg: RunConfig) -> torch.optim.Optimizer:
    tr = cfg.training
    encoder_params = list(model.encoder.parameters())
    encoder_ids = {id(p) for p in encoder_params}
    head_params = [p for p in model.parameters() if id(p) not in encoder_ids]
    opt = torch.optim.AdamW(
        [
            {"params": head_params, "lr": tr.lr},
            {"params": encoder_params, "lr": tr.encoder_lr},
        ],
        weight_decay=tr.weight_decay,
    )
    for group in opt.param_groups:
        group["base_lr"] = group["lr"]
    return opt


def batch_to_tensors(samples: list[PseudoSample], grid_hw: tuple[int, int], device: str):
    """Convert pseudo-samples to model inputs and grid-resolution targets.

    Returns (images, semantic_targets, per-sample gt mask stacks). Instances
    that vanish at grid resolution are dropped from the gt stacks.
    """
    images = torch.stack(
        [torch.from_numpy(s.image.astype(np.float32) / 255.0).permute(2, 0, 1) for s in samples]
    ).to(device)
    sem_targets = []
    batch_gts = []
    for s in samples:
        ds = resize_nearest(s.instance_map, grid_hw)
        sem = np.zeros(grid_hw, dtype=np.int64)
        masks = []
        for inst_id, cls in sorted(s.instance_categories.items()):
            m = ds == inst_id
            if m.any():
                sem[m] = cls
                masks.append(torch.from_numpy(m.astype(np.float32)))
        sem_targets.append(torch.from_numpy(sem))
        if masks:
            batch_gts.append(torch.stack(masks).to(device))
        else:
            batch_gts.append(torch.zeros((0,) + grid_hw, dtype=torch.float32, device=device))
    return images, torch.stack(sem_targets).to(device), batch_gts


def _match_batch(stage_masks: torch.Tensor, batch_gts: list[torch.Tensor]) -> list[list[tuple[int, int]]]:
    out = []
    for b, gts in enumerate(batch_gts):
        if gts.shape[0] == 0:
            out.append([])
        else:
            cost = matching_cost(stage_masks[b], gts)
            out.append(hungarian_match(cost).pairs)
    return out


def compute_losses(model: Segmenter, bank: TextBank, images, sem_targets, batch_gts,
                   lambda_mask: float, recompute_aux_assignment: bool = False):
    _, _, probs, proposals = model(images, bank)
    l_ce = semantic_ce_loss(probs, sem_targets)
    final_pairs = _match_batch(proposals.masks.detach(), batch_gts)
    l_mask, l_dice, l_bce, aux = proposal_mask_losses(proposals, batch_gts, final_pairs)
    if recompute_aux_assignment:
        from .losses import mask_loss
        aux = []
        for stage in proposals.aux_masks:
            stage_pairs = _match_batch(stage.detach(), batch_gts)
            totals = [
                mask_loss(stage[b], [], batch_gts[b], stage_pairs[b])[0]
                for b in range(stage.shape[0])
            ]
            aux.append(torch.stack(totals).mean())
    return total_loss(l_ce, l_mask, l_dice, l_bce, aux, lambda_mask=lambda_mask)


def train(
    cfg: RunConfig,
    model: Segmenter,
    bank: TextBank,
    sample_fn: SampleFn,
    output_dir: str,
    resume_from: str | None = None,
    eval_hook: Callable[[Segmenter, int], None] | None = None,
) -> TrainResult:
    os.makedirs(output_dir, exist_ok=True)
    tr = cfg.training
    device = cfg.resolved_device()
    model.to(device)
    model.train()
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    optimizer = build_optimizer(model, cfg)
    start_iter = 0
    if resume_from is not None:
        payload = load_checkpoint(resume_from, map_location=device)
        model.load_state_dict(payload["model_state"])
        if payload.get("optimizer_state"):
            optimizer.load_state_dict(payload["optimizer_state"])
            for group in optimizer.param_groups:
                group.setdefault("base_lr", group["lr"])
        start_iter = int(payload["iteration"])
        rng_extra = payload.get("extra", {}).get("rng")
        if rng_extra:
            rng.bit_generator.state = rng_extra["numpy"]
            torch.set_rng_state(torch.as_tensor(rng_extra["torch"], dtype=torch.uint8))

    grid = 2 * (cfg.model.crop_size // cfg.model.patch_size)
    grid_hw = (grid, grid)
    log_path = os.path.join(output_dir, "training_log.jsonl")
    mode = "a" if resume_from else "w"
    cp_path = os.path.join(output_dir, "checkpoint_final.pt")
    with open(log_path, mode, encoding="utf-8") as log:
        if mode == "w":
            log.write(json.dumps({"config_hash": config_hash(cfg), "record": "header"}) + "\n")
        t0 = time.time()
        for it in range(start_iter, tr.iterations):
            factor = poly_lr_factor(it, tr.iterations, tr.poly_power)
            for group in optimizer.param_groups:
                group["lr"] = group["base_lr"] * factor
            samples = [sample_fn(rng) for _ in range(tr.batch_size)]
            images, sem_targets, batch_gts = batch_to_tensors(samples, grid_hw, device)
            report = compute_losses(
                model, bank, images, sem_targets, batch_gts,
                lambda_mask=tr.lambda_mask,
                recompute_aux_assignment=tr.recompute_aux_assignment,
            )
            if not torch.isfinite(report.total):
                dump = os.path.join(output_dir, "diverged_batch.pt")
                torch.save({"iteration": it, "images": images.cpu(),
                            "sem_targets": sem_targets.cpu(),
                            "losses": {k: v for k, v in report.scalars().items()}}, dump)
                raise TrainingDiverged(
                    f"non-finite loss at iteration {it}; offending batch dumped to {dump}"
                )
            optimizer.zero_grad(set_to_none=True)
            report.total.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), tr.clip_norm)
            optimizer.step()
            done = it + 1
            if done % tr.log_interval == 0 or done == tr.iterations:
                rec = {"iteration": done, "lr": optimizer.param_groups[0]["lr"],
                       "wall_time": time.time() - t0}
                rec.update(report.scalars())
                log.write(json.dumps(rec) + "\n")
                log.flush()
            if done % tr.checkpoint_interval == 0 or done == tr.iterations:
                extra = {"rng": {"numpy": rng.bit_generator.state,
                                 "torch": torch.get_rng_state().tolist()}}
                path = os.path.join(output_dir, f"checkpoint_{done:06d}.pt")
                save_checkpoint(path, model, cfg, done, optimizer, extra=extra)
                save_checkpoint(cp_path, model, cfg, done, optimizer, extra=extra)
                if eval_hook is not None:
                    model.eval()
                    eval_hook(model, done)
                    model.train()
    model.eval()
    return TrainResult(checkpoint_path=cp_path, log_path=log_path, iterations=tr.iterations)
