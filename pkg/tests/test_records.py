import json

import numpy as np
import pytest

from ovseg.inference.predict import InstancePrediction, SemanticPrediction
from ovseg.inference.records import (
    category_color,
    decode_rle,
    encode_rle,
    read_prediction_records,
    read_semantic_png,
    render_overlay,
    write_prediction_records,
    write_semantic_png,
)

from conftest import make_blob_mask


def test_rle_round_trip_random_masks(rng):
    for _ in range(25):
        mask = (rng.random((int(rng.integers(1, 12)), int(rng.integers(1, 12)))) > 0.5).astype(np.uint8)
        rle = encode_rle(mask)
        np.testing.assert_array_equal(decode_rle(rle), mask)


def test_rle_starts_with_background_run():
    mask = np.ones((2, 3), dtype=np.uint8)
    rle = encode_rle(mask)
    assert rle["runs"][0] == 0          # zero-length background run first
    assert rle["runs"][1] == 6
    mask[0, 0] = 0
    rle = encode_rle(mask)
    assert rle["runs"][0] == 1


def test_rle_all_background():
    mask = np.zeros((3, 3), dtype=np.uint8)
    rle = encode_rle(mask)
    assert sum(rle["runs"]) == 9
    np.testing.assert_array_equal(decode_rle(rle), mask)


def test_rle_rejects_bad_total():
    with pytest.raises(ValueError):
        decode_rle({"height": 2, "width": 2, "runs": [1, 1]})


def test_rle_is_row_major():
    mask = np.zeros((2, 4), dtype=np.uint8)
    mask[0, 3] = 1
    mask[1, 0] = 1
    assert encode_rle(mask)["runs"] == [3, 2, 3]


def test_prediction_records_round_trip(rng, tmp_path):
    path = str(tmp_path / "records.jsonl")
    preds = {
        "scene_b": [InstancePrediction(mask=make_blob_mask(12, 12, 6, 6, 3),
                                       category=1, confidence=0.87654321999)],
        "scene_a": [InstancePrediction(mask=make_blob_mask(12, 12, 4, 4, 2),
                                       category=2, confidence=0.5)],
    }
    write_prediction_records(path, preds, ["background", "circle", "square"], "hash99")
    per_image, cfg_hash = read_prediction_records(path)
    assert cfg_hash == "hash99"
    assert sorted(per_image) == ["scene_a", "scene_b"]
    rec = per_image["scene_b"][0]
    assert rec["category"] == "circle"
    assert rec["confidence"] == pytest.approx(0.87654322)   # rounded to 8 dp
    np.testing.assert_array_equal(rec["mask"], preds["scene_b"][0].mask)


def test_records_file_layout(tmp_path):
    path = str(tmp_path / "records.jsonl")
    preds = {"s": [InstancePrediction(mask=make_blob_mask(8, 8, 4, 4, 2),
                                      category=1, confidence=0.25)]}
    write_prediction_records(path, preds, ["background", "dot"], "abc")
    lines = [json.loads(l) for l in open(path)]
    assert lines[0] == {"record": "header", "config_hash": "abc"}
    assert lines[1]["image_id"] == "s"
    assert lines[1]["category"] == "dot"
    assert set(lines[1]) == {"image_id", "category", "confidence", "rle"}


def test_records_sorted_by_image_id(tmp_path):
    path = str(tmp_path / "records.jsonl")
    mask = make_blob_mask(8, 8, 4, 4, 2)
    preds = {name: [InstancePrediction(mask=mask, category=1, confidence=0.5)]
             for name in ["zz", "aa", "mm"]}
    write_prediction_records(path, preds, ["background", "x"], "")
    ids = [json.loads(l)["image_id"] for l in open(path).readlines()[1:]]
    assert ids == ["aa", "mm", "zz"]


def test_semantic_png_round_trip(rng, tmp_path):
    labels = rng.integers(0, 5, size=(16, 16)).astype(np.int64)
    path = str(tmp_path / "sem.png")
    write_semantic_png(path, SemanticPrediction(labels=labels))
    np.testing.assert_array_equal(read_semantic_png(path), labels)


def test_category_color_is_stable_and_bright():
    c1 = category_color("circle")
    c2 = category_color("circle")
    assert c1 == c2
    assert all(64 <= v < 256 for v in c1)
    assert category_color("square") != c1


def test_render_overlay_shapes(rng):
    image = rng.integers(0, 255, size=(16, 16, 3)).astype(np.uint8)
    preds = [InstancePrediction(mask=make_blob_mask(16, 16, 8, 8, 4),
                                category=1, confidence=0.9)]
    out = render_overlay(image, preds, ["background", "circle"])
    assert out.shape == (16, 16, 3)
    assert out.dtype == np.uint8
    # the masked region is tinted, the rest untouched
    region = preds[0].mask.astype(bool)
    assert not np.array_equal(out[region], image[region])
    np.testing.assert_array_equal(out[~region], image[~region])
