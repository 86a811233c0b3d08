"""End-to-end pipeline orchestration and the command line wrappers on a tiny
synthetic run. One full run is shared by the inspection tests."""

import dataclasses
import filecmp
import json
import math
import os

import numpy as np
import pytest
from click.testing import CliRunner

from ovseg.cli import main as cli_main
from ovseg.config import config_hash, save_config
from ovseg.errors import ConfigError, EvaluationError
from ovseg.inference.predict import InstancePrediction
from ovseg.inference.records import read_prediction_records, write_prediction_records
from ovseg.pipeline import (
    run_ablate,
    run_build_archives,
    run_demo,
    run_evaluate,
    run_make_corpus,
    run_make_pseudo_labels,
    run_predict,
)

from conftest import tiny_run_config


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    run_dir = str(tmp_path_factory.mktemp("demo"))
    cfg = tiny_run_config(seed=11)
    metrics = run_demo(cfg, run_dir)
    return cfg, run_dir, metrics


def _linked_run(tmp_path, src_run_dir, subs=("train", "eval")):
    """A fresh run dir borrowing stage outputs from an existing run."""
    run_dir = tmp_path / "linked"
    run_dir.mkdir()
    for sub in subs:
        os.symlink(os.path.join(src_run_dir, sub), run_dir / sub)
    return str(run_dir)


# ------------------------------------------------------------ demo artifacts

def test_demo_stage_artifacts(demo_run):
    cfg, run_dir, _ = demo_run
    for cat in cfg.categories:
        assert os.path.exists(os.path.join(run_dir, "archives", f"{cat}.txt"))
    assert os.path.exists(os.path.join(run_dir, "index", "embeddings.f32"))
    assert os.path.exists(os.path.join(run_dir, "index", "locators.txt"))
    assert os.path.exists(os.path.join(run_dir, "pseudo_labels", "pseudo_summary.txt"))
    assert os.path.exists(os.path.join(run_dir, "train", "checkpoint_final.pt"))
    assert os.path.exists(os.path.join(run_dir, "train", "training_log.jsonl"))
    assert os.path.exists(os.path.join(run_dir, "predictions", "records.jsonl"))
    assert os.path.exists(os.path.join(run_dir, "metrics.txt"))
    sem = os.listdir(os.path.join(run_dir, "predictions", "semantic"))
    assert len(sem) == cfg.data.num_eval_scenes
    overlays = os.listdir(os.path.join(run_dir, "predictions", "overlays"))
    assert len(overlays) == cfg.data.num_eval_scenes


def test_demo_metric_keys_and_report(demo_run):
    cfg, run_dir, metrics = demo_run
    for key in ("miou", "ap", "ap50", "ap75", "ap_agnostic", "ap_agnostic50", "ap_agnostic75"):
        assert key in metrics
        assert math.isfinite(metrics[key])
        assert 0.0 <= metrics[key] <= 1.0
    lines = open(os.path.join(run_dir, "metrics.txt")).read().splitlines()
    assert lines[0] == f"config_hash={config_hash(cfg)}"
    keys = [l.split("=")[0] for l in lines[1:]]
    assert keys == sorted(keys)
    for line in lines[1:]:
        key, value = line.split("=")
        assert metrics[key] == pytest.approx(float(value), abs=5e-7)


def test_demo_records_match_eval_stems(demo_run):
    cfg, run_dir, _ = demo_run
    per_image, rec_hash = read_prediction_records(
        os.path.join(run_dir, "predictions", "records.jsonl"))
    stems = {f"scene_{i:05d}" for i in range(cfg.data.num_eval_scenes)}
    # one line per instance, so only images with detections appear
    assert set(per_image) <= stems
    assert rec_hash == config_hash(cfg)


def test_pseudo_summary_counts(demo_run):
    cfg, run_dir, _ = demo_run
    lines = open(os.path.join(run_dir, "pseudo_labels", "pseudo_summary.txt")).read().splitlines()
    assert lines[0] == f"config_hash: {config_hash(cfg)}"
    rows = dict(l.split("\t", 1) for l in lines[1:])
    assert set(rows) == set(cfg.categories)
    # the oracle detector never fails on clean synthetic shapes
    for row in rows.values():
        assert "failed=0" in row


# -------------------------------------------------------------- guard rails

def test_predict_refuses_model_config_mismatch(demo_run, tmp_path):
    cfg, run_dir, _ = demo_run
    bad = dataclasses.replace(cfg, model=dataclasses.replace(cfg.model, e_v=32))
    with pytest.raises(ConfigError, match=r"model\.e_v"):
        run_predict(bad, _linked_run(tmp_path, run_dir))


def test_evaluate_rejects_unknown_image_ids(demo_run, tmp_path):
    cfg, run_dir, _ = demo_run
    records_path = str(tmp_path / "records.jsonl")
    fake = np.zeros((8, 8), dtype=np.uint8)
    fake[2:5, 2:5] = 1
    pred = InstancePrediction(mask=fake, category=1, confidence=0.9)
    write_prediction_records(records_path, {"nope_00000": [pred]},
                             cfg.class_names, config_hash(cfg))
    with pytest.raises(EvaluationError, match="unknown image ids"):
        run_evaluate(cfg, run_dir, records_path=records_path)


def test_evaluate_requires_scenes(tmp_path):
    cfg = tiny_run_config()
    (tmp_path / "eval").mkdir()
    with pytest.raises(EvaluationError, match="no eval scenes"):
        run_evaluate(cfg, str(tmp_path))


# ---------------------------------------------------------------- zero shot

def test_zero_shot_extra_category_flows_through(demo_run, tmp_path):
    cfg, run_dir, _ = demo_run
    linked = _linked_run(tmp_path, run_dir)
    records_path = run_predict(cfg, linked, extra_categories=["cross"])
    per_image, _ = read_prediction_records(records_path)
    names = {rec["category_name"] for preds in per_image.values() for rec in preds}
    assert names <= set(cfg.class_names) | {"cross"}
    metrics = run_evaluate(cfg, linked, extra_categories=["cross"])
    assert math.isfinite(metrics["miou"])


def test_predict_on_bare_image_dir(demo_run, tmp_path):
    cfg, run_dir, _ = demo_run
    bare = tmp_path / "bare"
    bare.mkdir()
    src = os.path.join(run_dir, "eval", "scene_00000.png")
    (bare / "lone.png").write_bytes(open(src, "rb").read())
    linked = _linked_run(tmp_path, run_dir, subs=("train",))
    records_path = run_predict(cfg, linked, image_dir=str(bare))
    per_image, _ = read_prediction_records(records_path)
    assert set(per_image) <= {"lone"}
    assert os.path.exists(os.path.join(linked, "predictions", "semantic", "lone.png"))


# -------------------------------------------------------------- determinism

def test_curation_stages_are_deterministic(tmp_path):
    cfg = tiny_run_config(seed=23)
    dirs = [str(tmp_path / "a"), str(tmp_path / "b")]
    for d in dirs:
        run_make_corpus(cfg, d)
        run_build_archives(cfg, d)
        run_make_pseudo_labels(cfg, d)
    for cat in cfg.categories:
        a = os.path.join(dirs[0], "archives", f"{cat}.txt")
        b = os.path.join(dirs[1], "archives", f"{cat}.txt")
        assert filecmp.cmp(a, b, shallow=False)
    names_a = sorted(os.listdir(os.path.join(dirs[0], "pseudo_labels")))
    names_b = sorted(os.listdir(os.path.join(dirs[1], "pseudo_labels")))
    assert names_a == names_b
    for name in names_a:
        assert filecmp.cmp(os.path.join(dirs[0], "pseudo_labels", name),
                           os.path.join(dirs[1], "pseudo_labels", name), shallow=False)


# ----------------------------------------------------------------- ablation

def test_ablate_temperature_axis(tmp_path):
    cfg = tiny_run_config(seed=3)
    rows = run_ablate(cfg, str(tmp_path), "temperature")
    assert [row["temperature"] for row in rows] == [0.1, 0.5, 1.0, 5.0, 10.0]
    table = os.path.join(tmp_path, "ablation_temperature.txt")
    lines = open(table).read().splitlines()
    assert lines[0] == f"config_hash={config_hash(cfg)}"
    assert [json.loads(l)["temperature"] for l in lines[1:]] == [0.1, 0.5, 1.0, 5.0, 10.0]


def test_ablate_unknown_axis(tmp_path):
    with pytest.raises(ConfigError, match="unknown ablation axis"):
        run_ablate(tiny_run_config(), str(tmp_path), "bogus")


# ---------------------------------------------------------------------- CLI

def test_cli_stage_chain(tmp_path):
    cfg = tiny_run_config(seed=5)
    cfg_path = str(tmp_path / "tiny.yaml")
    save_config(cfg, cfg_path)
    out = str(tmp_path / "run")
    runner = CliRunner()

    r = runner.invoke(cli_main, ["build-archives", "--config", cfg_path, "--output-dir", out])
    assert r.exit_code == 0, r.output
    assert "generating the synthetic corpus" in r.output
    for cat in cfg.categories:
        assert cat in r.output

    r = runner.invoke(cli_main, ["make-pseudo-labels", "--config", cfg_path, "--output-dir", out])
    assert r.exit_code == 0, r.output
    assert "kept=" in r.output

    r = runner.invoke(cli_main, ["train", "--config", cfg_path, "--output-dir", out])
    assert r.exit_code == 0, r.output
    assert "trained 4 iterations" in r.output

    r = runner.invoke(cli_main, ["predict", "--config", cfg_path, "--output-dir", out,
                                 "--categories", "cross"])
    assert r.exit_code == 0, r.output
    assert "records:" in r.output

    r = runner.invoke(cli_main, ["evaluate", "--config", cfg_path, "--output-dir", out,
                                 "--mode", "class_aware", "--categories", "cross"])
    assert r.exit_code == 0, r.output
    assert "miou=" in r.output and "ap50=" in r.output
    assert "ap_agnostic" not in r.output  # class_aware only


def test_cli_train_resume_flag(tmp_path):
    cfg = tiny_run_config(seed=9)
    cfg_path = str(tmp_path / "tiny.yaml")
    save_config(cfg, cfg_path)
    out = str(tmp_path / "run")
    runner = CliRunner()
    assert runner.invoke(cli_main, ["build-archives", "--config", cfg_path,
                                    "--output-dir", out]).exit_code == 0
    assert runner.invoke(cli_main, ["make-pseudo-labels", "--config", cfg_path,
                                    "--output-dir", out]).exit_code == 0
    assert runner.invoke(cli_main, ["train", "--config", cfg_path,
                                    "--output-dir", out]).exit_code == 0
    ckpt = os.path.join(out, "train", "checkpoint_final.pt")
    r = runner.invoke(cli_main, ["train", "--config", cfg_path, "--output-dir", out,
                                 "--checkpoint", ckpt])
    assert r.exit_code == 0, r.output


def test_cli_seed_override(tmp_path):
    runner = CliRunner()
    out = str(tmp_path / "run")
    cfg = tiny_run_config(seed=5)
    cfg_path = str(tmp_path / "tiny.yaml")
    save_config(cfg, cfg_path)
    r = runner.invoke(cli_main, ["build-archives", "--config", cfg_path,
                                 "--seed", "77", "--output-dir", out])
    assert r.exit_code == 0, r.output
    manifest = open(os.path.join(out, "archives", f"{cfg.categories[0]}.txt")).read()
    overridden = dataclasses.replace(cfg, seed=77)
    assert config_hash(overridden) in manifest
