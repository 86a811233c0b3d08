"""Command line entry points.

Every subcommand works out of a single run directory (``--output-dir``) so
artifacts from consecutive stages find each other without extra plumbing.
"""

from __future__ import annotations

import dataclasses

import click

from .config import RunConfig, config_hash, load_config


def _load_cfg(config_path: str | None, seed: int | None) -> RunConfig:
    cfg = load_config(config_path) if config_path else RunConfig()
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _split_categories(raw: str | None) -> list[str]:
    if not raw:
        return []
    return [part.strip() for part in raw.split(",") if part.strip()]


config_option = click.option("--config", "config_path", type=click.Path(exists=True),
                             default=None, help="YAML config file; defaults apply if omitted.")
seed_option = click.option("--seed", type=int, default=None,
                           help="Override the config seed.")
output_dir_option = click.option("--output-dir", default="runs/run", show_default=True,
                                 help="Run directory holding all stage artifacts.")


@click.group()
def main() -> None:
    """Open-vocabulary segmentation: data curation, training, inference,
    evaluation."""


@main.command("build-archives")
@config_option
@seed_option
@output_dir_option
def build_archives_cmd(config_path, seed, output_dir) -> None:
    """Rank the image index by prompt similarity, one archive per category."""
    import os

    from .pipeline import run_build_archives, run_make_corpus

    cfg = _load_cfg(config_path, seed)
    index_root = cfg.data.index_dir or os.path.join(output_dir, "index")
    if not os.path.isdir(index_root):
        click.echo(f"no index at {index_root}; generating the synthetic corpus")
        run_make_corpus(cfg, output_dir)
    summary = run_build_archives(cfg, output_dir)
    for cat, row in summary.items():
        click.echo(f"{cat}: {row['count']} members, "
                   f"sim {row['sim_min']:.4f}..{row['sim_max']:.4f}")


@main.command("make-pseudo-labels")
@config_option
@seed_option
@output_dir_option
def make_pseudo_labels_cmd(config_path, seed, output_dir) -> None:
    """Turn archive members into single-object pseudo-labels via saliency."""
    from .pipeline import run_make_pseudo_labels

    cfg = _load_cfg(config_path, seed)
    summary = run_make_pseudo_labels(cfg, output_dir)
    for cat, row in summary.items():
        click.echo(f"{cat}: kept={row['kept']} discarded={row['discarded']} failed={row['failed']}")


@main.command("train")
@config_option
@seed_option
@output_dir_option
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True), default=None,
              help="Resume training from this checkpoint.")
def train_cmd(config_path, seed, output_dir, checkpoint_path) -> None:
    """Train the dual-head segmenter on pseudo-label composites."""
    from .pipeline import run_train

    cfg = _load_cfg(config_path, seed)
    result = run_train(cfg, output_dir, resume_from=checkpoint_path)
    click.echo(f"trained {result.iterations} iterations (config {config_hash(cfg)})")
    click.echo(f"checkpoint: {result.checkpoint_path}")


@main.command("predict")
@config_option
@seed_option
@output_dir_option
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True), default=None,
              help="Checkpoint to load; defaults to <output-dir>/train/checkpoint_final.pt.")
@click.option("--categories", default=None,
              help="Comma separated extra category names for zero-shot prediction.")
@click.option("--overlays/--no-overlays", default=False, show_default=True,
              help="Also write per-image overlay renderings.")
def predict_cmd(config_path, seed, output_dir, checkpoint_path, categories, overlays) -> None:
    """Predict semantic maps and instance records for the eval images."""
    from .pipeline import run_predict

    cfg = _load_cfg(config_path, seed)
    records_path = run_predict(
        cfg, output_dir,
        checkpoint_path=checkpoint_path,
        extra_categories=_split_categories(categories),
        write_overlays=overlays,
    )
    click.echo(f"records: {records_path}")


@main.command("evaluate")
@config_option
@seed_option
@output_dir_option
@click.option("--mode", type=click.Choice(["class_aware", "class_agnostic", "both"]),
              default=None, help="Detection evaluation mode; defaults to the config value.")
@click.option("--categories", default=None,
              help="Comma separated extra category names the predictions may use.")
def evaluate_cmd(config_path, seed, output_dir, mode, categories) -> None:
    """Score stored predictions: mIoU plus mask AP."""
    from .pipeline import run_evaluate

    cfg = _load_cfg(config_path, seed)
    metrics = run_evaluate(cfg, output_dir, mode=mode,
                           extra_categories=_split_categories(categories))
    for key in sorted(metrics):
        click.echo(f"{key}={metrics[key]:.6f}")


@main.command("ablate")
@config_option
@seed_option
@output_dir_option
@click.argument("axis", type=click.Choice(["stop_grad", "nms", "copy_paste", "temperature"]))
def ablate_cmd(config_path, seed, output_dir, axis) -> None:
    """Paired runs toggling one design choice; prints the comparison rows."""
    import json

    from .pipeline import run_ablate

    cfg = _load_cfg(config_path, seed)
    rows = run_ablate(cfg, output_dir, axis)
    for row in rows:
        click.echo(json.dumps(row))


@main.command("demo-shapes")
@config_option
@seed_option
@output_dir_option
@click.option("--mode", type=click.Choice(["class_aware", "class_agnostic", "both"]),
              default=None, help="Detection evaluation mode; defaults to the config value.")
def demo_shapes_cmd(config_path, seed, output_dir, mode) -> None:
    """End-to-end run on the synthetic shapes benchmark."""
    from .pipeline import run_demo

    cfg = _load_cfg(config_path, seed)
    if mode is not None:
        cfg = dataclasses.replace(cfg, evaluation=dataclasses.replace(cfg.evaluation, mode=mode))
    metrics = run_demo(cfg, output_dir)
    for key in sorted(metrics):
        click.echo(f"{key}={metrics[key]:.6f}")


if __name__ == "__main__":
    main()
