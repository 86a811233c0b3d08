"""Run configuration: a strict, hashable key-value tree loaded from YAML.

Unknown keys are hard errors so a typo in an ablation config cannot silently
fall back to a default. Every artifact the pipeline writes embeds the hash of
the config that produced it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError

DEVICE_ENV_VAR = "OVSEG_DEVICE"


@dataclass
class DataConfig:
    index_dir: str = ""         # defaults to <run_dir>/index when empty
    mask_dir: str = ""          # precomputed saliency masks (external detector route)
    archive_k: int = 500
    max_paste_sources: int = 10
    same_archive_prob: float = 0.5
    num_index_images: int = 240     # synthetic corpus size (demo/benchmark)
    num_eval_scenes: int = 100      # synthetic eval-set size
    canvas_size: int = 64           # synthetic image side


@dataclass
class AugmentConfig:
    flip_prob: float = 0.5
    scale_range: tuple[float, float] = (0.1, 1.0)
    color_jitter_prob: float = 0.8
    grayscale_prob: float = 0.2
    blur_prob: float = 0.5
    blur_kernel_frac: float = 0.1


@dataclass
class ModelConfig:
    backend: str = "toy"    # "toy" | "pretrained"
    e_v: int = 128          # visual feature channels
    e_t: int = 64           # text embedding dimension
    d: int = 128            # decoder/value width
    n_q: int = 100          # number of object queries
    patch_size: int = 16
    encoder_layers: int = 2
    encoder_heads: int = 4
    decoder_layers: int = 6
    decoder_heads: int = 8
    crop_size: int = 384
    joint_dim: int = 64     # retrieval (image-text index) embedding dimension
    text_seed: int = 0      # seed of the hash text encoder


@dataclass
class TrainingConfig:
    lr: float = 5e-5
    encoder_lr: float = 5e-6
    weight_decay: float = 0.05
    lambda_mask: float = 1.0
    iterations: int = 20000
    batch_size: int = 8
    poly_power: float = 0.9
    clip_norm: float = 1.0
    log_interval: int = 50
    checkpoint_interval: int = 1000
    stop_grad: bool = True
    use_copy_paste: bool = True
    recompute_aux_assignment: bool = False


@dataclass
class InferenceConfig:
    binarize_threshold: float = 0.5
    temperature: float = 5.0
    nms_iou_threshold: float = 0.5
    max_long_side: int = 1024
    score_floor: float = 0.0
    apply_nms: bool = True
    restore_mode: str = "nearest"   # "nearest" | "bilinear" (re-thresholded)

    def validate(self) -> None:
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ConfigError(f"binarize_threshold must be in (0,1), got {self.binarize_threshold}")
        if self.temperature <= 0.0:
            raise ConfigError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 < self.nms_iou_threshold <= 1.0:
            raise ConfigError(f"nms_iou_threshold must be in (0,1], got {self.nms_iou_threshold}")
        if self.restore_mode not in ("nearest", "bilinear"):
            raise ConfigError(f"restore_mode must be nearest|bilinear, got {self.restore_mode!r}")


@dataclass
class EvalConfig:
    mode: str = "both"      # class_aware | class_agnostic | both

    def validate(self) -> None:
        if self.mode not in ("class_aware", "class_agnostic", "both"):
            raise ConfigError(f"evaluation mode must be class_aware|class_agnostic|both, got {self.mode!r}")


@dataclass
class RunConfig:
    seed: int = 0
    device: str = "cpu"
    categories: list[str] = field(default_factory=lambda: ["circle", "square", "triangle"])
    templates: list[str] | None = None   # None -> the default 85-template prompt set
    data: DataConfig = field(default_factory=DataConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    inference: InferenceConfig = field(default_factory=InferenceConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        if not self.categories:
            raise ConfigError("categories must be non-empty")
        if len(set(self.categories)) != len(self.categories):
            raise ConfigError("categories must be distinct")
        if "background" in self.categories:
            raise ConfigError("'background' is implicit (class index 0); list foreground categories only")
        self.inference.validate()
        self.evaluation.validate()

    @property
    def class_names(self) -> list[str]:
        """Full class list: background at index 0, then foreground categories."""
        return ["background"] + list(self.categories)

    def resolved_device(self) -> str:
        return os.environ.get(DEVICE_ENV_VAR, self.device)


_SECTIONS = {
    "data": DataConfig,
    "augment": AugmentConfig,
    "model": ModelConfig,
    "training": TrainingConfig,
    "inference": InferenceConfig,
    "evaluation": EvalConfig,
}


def _build_section(cls, raw: dict, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    if "scale_range" in kwargs and kwargs["scale_range"] is not None:
        kwargs["scale_range"] = tuple(kwargs["scale_range"])
    return cls(**kwargs)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    top_names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(raw) - top_names
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as f:
        raw = yaml.safe_load(f)
    if raw is None:
        raw = {}
    return config_from_dict(raw)


def save_config(cfg: RunConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=True)


def config_to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["augment"]["scale_range"] = list(d["augment"]["scale_range"])
    return d


def config_hash(cfg: RunConfig) -> str:
    """Stable 12-hex-digit digest of the full configuration tree."""
    canonical = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
