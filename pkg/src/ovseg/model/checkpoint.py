"""Versioned checkpoints: parameters plus the full config echo, iteration and
seed. Files from another format version are rejected loudly, never guessed at."""

from __future__ import annotations

import torch

from ..config import RunConfig, config_from_dict, config_hash, config_to_dict
from ..errors import CheckpointFormatError
from .segmenter import Segmenter, build_segmenter

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(path: str, model: Segmenter, cfg: RunConfig, iteration: int,
                    optimizer: torch.optim.Optimizer | None = None,
                    extra: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": config_to_dict(cfg),
        "config_hash": config_hash(cfg),
        "iteration": int(iteration),
        "seed": int(cfg.seed),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path: str, map_location: str = "cpu") -> dict:
    try:
        payload = torch.load(path, map_location=map_location, weights_only=True)
    except CheckpointFormatError:
        raise
    except Exception as exc:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CheckpointFormatError(f"{path} is not a checkpoint produced by this package")
    version = payload["format_version"]
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointFormatError(
            f"checkpoint {path} has format version {version}; this build reads only "
            f"version {CHECKPOINT_FORMAT_VERSION}. Re-train or convert explicitly."
        )
    return payload


def restore_segmenter(payload: dict, stop_gradient: bool | None = None) -> tuple[Segmenter, RunConfig]:
    cfg = config_from_dict(payload["config"])
    model = build_segmenter(cfg, stop_gradient=stop_gradient)
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, cfg
