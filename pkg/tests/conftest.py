import dataclasses

import numpy as np
import pytest

from ovseg.config import (
    AugmentConfig,
    DataConfig,
    ModelConfig,
    RunConfig,
    TrainingConfig,
)

# Criterion verdicts collected by tests/test_acceptance.py; echoed after the
# run summary so they stay visible even though pytest captures stdout.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def tiny_run_config(seed: int = 7, **overrides) -> RunConfig:
    """A config small enough that every pipeline stage finishes in seconds."""
    cfg = RunConfig(
        seed=seed,
        data=DataConfig(archive_k=12, num_index_images=30, num_eval_scenes=4,
                        canvas_size=64, max_paste_sources=3),
        model=ModelConfig(e_v=64, e_t=32, d=64, n_q=8, patch_size=8,
                          encoder_layers=1, encoder_heads=4,
                          decoder_layers=2, decoder_heads=4,
                          crop_size=64, joint_dim=32),
        training=TrainingConfig(iterations=4, batch_size=2, log_interval=2,
                                checkpoint_interval=4),
    )
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


@pytest.fixture
def tiny_cfg() -> RunConfig:
    return tiny_run_config()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def make_blob_mask(h: int, w: int, cy: int, cx: int, r: int) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return (((yy - cy) ** 2 + (xx - cx) ** 2) <= r * r).astype(np.uint8)


@pytest.fixture
def quiet_augment() -> AugmentConfig:
    """Augmentations with every random branch disabled and identity scaling."""
    return AugmentConfig(flip_prob=0.0, scale_range=(1.0, 1.0),
                         color_jitter_prob=0.0, grayscale_prob=0.0, blur_prob=0.0)
