import json

import numpy as np
import pytest

import afran


def tiny_config(**train):
    cfg = {
        "model": {
            "input_size": 128,
            "width_multiplier": 0.0625,
            "affm": {"channels": 8},
            "dlcm": {"channels": 8},
            "anchors": {"scales": [16.0, 32.0, 64.0]},
        },
        "train": {"epochs": 1, "lr_decay_epochs": [], "warmup_epochs": 0, "seed": 3},
        "data": {
            "train_count": 8,
            "val_count": 0,
            "test_count": 4,
            "scene": {"size": 128, "min_span": 16, "max_span": 40},
        },
    }
    cfg["train"].update(train)
    return cfg


def test_default_config_round_trips():
    cfg = afran.default_config()
    assert cfg["train"]["epochs"] == 200
    assert cfg["train"]["lr_decay_epochs"] == [75, 150]


def test_bad_config_raises():
    with pytest.raises(afran.ConfigError):
        afran.complexity({"model": {"no_such_key": 1}})


def test_scene_is_deterministic():
    a, boxes_a = afran.generate_scene(size=256, seed=5)
    b, boxes_b = afran.generate_scene(size=256, seed=5)
    assert a.dtype == np.uint8 and a.shape == (256, 256)
    assert np.array_equal(a, b)
    assert boxes_a == boxes_b
    for x1, y1, x2, y2 in boxes_a:
        assert 0 <= x1 < x2 <= 256 and 0 <= y1 < y2 <= 256


def test_tiling_origins():
    img = np.zeros((1280, 1280), dtype=np.uint8)
    tiles, origins = afran.tile(img, 640, 0)
    assert origins == [(0, 0), (640, 0), (0, 640), (640, 640)]
    assert all(t.shape == (640, 640) for t in tiles)


def test_complexity_single_numbers():
    full = afran.complexity()
    assert abs(full["params_total"] / 35.82e6 - 1) < 0.10
    assert abs(full["mac_total"] / 150.59e9 - 1) < 0.10
    assert sum(layer["params"] for layer in full["layers"]) == full["params_total"]


def test_iou():
    assert afran.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert afran.iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_train_evaluate_detect(tmp_path):
    cfg = tiny_config()
    afran.synthesize(tmp_path / "data", cfg)
    split = json.loads((tmp_path / "data" / "split.json").read_text())
    assert [len(split[k]) for k in ("train", "val", "test")] == [8, 0, 4]

    summary = afran.train(tmp_path / "data", tmp_path / "run", cfg)
    assert summary["steps"] == 2
    ckpt = tmp_path / "run" / "last.ckpt"
    assert ckpt.exists()

    report = afran.evaluate(ckpt, tmp_path / "data", "test")
    assert report == afran.evaluate(ckpt, tmp_path / "data", "test")
    assert "AP50" in report

    img, _ = afran.generate_scene(size=256, seed=1)
    dets = afran.detect(ckpt, img, tile=128)
    for d in dets:
        x1, y1, x2, y2 = d["box"]
        assert x2 > x1 and y2 > y1 and 0 <= d["score"] <= 1
