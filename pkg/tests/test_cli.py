import json
import shutil

import numpy as np
import pytest

from wpgd.cli import main

TOY_COST = "[[0, 10, 0.01], [10, 0, 1], [0.01, 1, 0]]"


def write_config(tmp_path, name="config.json", **overrides):
    cfg = {
        "seed": 0,
        "dataset": {"type": "synthetic", "per_class": 40, "test_per_class": 20, "sigma": 0.15},
        "model": {"hidden": [8], "activation": "relu"},
        "train": {"mode": "ce", "epochs": 5, "learning_rate": 0.2, "batch_size": 32},
        "cost_matrix": {"path": "cost.json", "p": 1.0},
        "eval": {
            "attacks": [
                {"name": "tiny", "eps": 1e-12, "steps": 2, "norm": "l2", "clamp": [-2.0, 3.0],
                 "random_start": False, "seed": 1}
            ],
            "boundary": {"bbox": [-0.5, 1.5, -0.5, 1.4], "resolution": 20},
        },
        "output_dir": str(tmp_path / "runs"),
    }
    cfg.update(overrides)
    (tmp_path / "cost.json").write_text(TOY_COST)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run_dir_of(tmp_path):
    runs = tmp_path / "runs"
    dirs = [d for d in runs.iterdir() if d.is_dir()]
    assert len(dirs) >= 1
    return dirs


def test_validate_config_ok(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["validate-config", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["config"]["train"]["epochs"] == 5
    assert len(out["config_hash"]) == 12


def test_validate_config_bad_field(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["validate-config", str(cfg), "--set", "train.mode=bogus"]) == 2
    assert "train.mode" in capsys.readouterr().err


def test_wpgd_without_cost_matrix_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, cost_matrix=None)
    code = main([
        "validate-config", str(cfg),
        "--set", "train.mode=wpgd",
        "--set", 'train.attack={"eps":0.1,"objective":"wasserstein"}',
        "--set", "eval.attacks=[]",
    ])
    assert code == 2
    assert "cost_matrix" in capsys.readouterr().err


def test_missing_dataset_file_is_config_error(tmp_path):
    cfg = write_config(
        tmp_path,
        dataset={
            "type": "mnist",
            "train_images": "missing", "train_labels": "missing",
            "test_images": "missing", "test_labels": "missing",
        },
    )
    assert main(["validate-config", str(cfg)]) == 2


def test_gen_data(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["gen-data", str(cfg)]) == 0
    (d,) = run_dir_of(tmp_path)
    train_csv = (d / "data_train.csv").read_text().strip().split("\n")
    assert train_csv[0] == "x1,x2,label"
    assert len(train_csv) == 1 + 3 * 40
    assert (d / "data_test.csv").exists()


def test_train_and_eval_outputs(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["train", str(cfg)]) == 0
    (d,) = run_dir_of(tmp_path)
    for name in ("checkpoint.json", "train_report.json", "resolved_config.json", "timing.json", "training.png"):
        assert (d / name).exists(), name
    report = json.loads((d / "train_report.json").read_text())
    assert report["config_hash"] == d.name
    assert report["artifact_version"]
    assert report["epochs"][-1]["natural_error"] < 2.0

    assert main(["eval", str(d / "checkpoint.json"), str(cfg)]) == 0
    metrics = json.loads((d / "metrics.json").read_text())
    # degenerate-radius attack leaves predictions unchanged
    nat = np.loadtxt(d / "confusion_natural.csv", delimiter=",", comments="#")
    adv = np.loadtxt(d / "confusion_tiny.csv", delimiter=",", comments="#")
    assert np.array_equal(nat, adv)
    assert metrics["attack_tiny"]["adversarial_error"] == pytest.approx(metrics["natural_error"])
    assert "boundary_changes" in metrics
    assert (d / "boundary.csv").exists()
    assert (d / "boundary.png").exists()
    assert (d / "entropy_hist.png").exists()


def test_train_byte_identical_reruns(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["train", str(cfg)]) == 0
    (d,) = run_dir_of(tmp_path)
    saved = {f.name: f.read_bytes() for f in d.iterdir() if f.name != "timing.json"}
    shutil.rmtree(d)
    assert main(["train", str(cfg)]) == 0
    (d2,) = run_dir_of(tmp_path)
    for name, blob in saved.items():
        assert (d2 / name).read_bytes() == blob, f"{name} differs between reruns"


def test_compare_self_is_zero(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["train", str(cfg)]) == 0
    (d,) = run_dir_of(tmp_path)
    ckpt = str(d / "checkpoint.json")
    assert main(["compare", ckpt, ckpt, str(cfg)]) == 0
    report = json.loads((d / "compare.json").read_text())
    assert np.all(np.asarray(report["gap_natural"]) == 0)
    assert report["score_delta_tiny"] == pytest.approx(0.0)


def test_missing_checkpoint_is_io_error(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["eval", str(tmp_path / "nope.json"), str(cfg)]) == 4


def test_eps_255_on_train(tmp_path):
    cfg = write_config(tmp_path, train={
        "mode": "pgd", "epochs": 1, "learning_rate": 0.1, "batch_size": 32,
        "attack": {"eps": 0.5, "steps": 2, "norm": "linf", "seed": 0},
    })
    assert main(["train", str(cfg), "--eps-255", "8"]) == 0
    (d,) = run_dir_of(tmp_path)
    resolved = json.loads((d / "resolved_config.json").read_text())
    assert resolved["config"]["train"]["attack"]["eps"] == pytest.approx(8 / 255)
