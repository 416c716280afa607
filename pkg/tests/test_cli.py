import hashlib
import json

import numpy as np
import pytest
from PIL import Image

from armaps import checkpoint
from armaps.cli import main
from armaps.network import RELU, SOFTMAX, Model, NetworkSpec, conv, dense, init_params
from armaps.numerics import ConvParams, DenseParams


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def shapes_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("shapes")
    assert main(["make-shapes", "--out", str(d), "--count", "60", "--input-size", "16", "--seed", "3"]) == 0
    return d


def train_args(data_dir, out, seed=0):
    return ["train", "--preset", "shallow", "--width", "2", "--input-size", "16", "--manifest",
            str(data_dir / "manifest.csv"), "--out", str(out), "--epochs", "2", "--batch-size", "8",
            "--min-count", "5", "--seed", str(seed)]


@pytest.fixture(scope="module")
def trained(shapes_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(train_args(shapes_dir, out)) == 0
    return out


def test_train_outputs(trained):
    assert (trained / "checkpoint.armc").is_file()
    metrics = [json.loads(l) for l in (trained / "metrics.jsonl").read_text().splitlines()]
    assert [m["epoch"] for m in metrics] == [1, 2]
    run = json.loads((trained / "run_manifest.json").read_text())
    assert run["seed"] == 0 and run["command"] == "train"
    assert run["checkpoint_sha256"] == sha(trained / "checkpoint.armc")
    assert run["spec_hash"] == checkpoint.load(trained / "checkpoint.armc").spec.spec_hash()
    assert run["seed_streams"]["split"] == [0, 0]


def test_rerun_same_seed_identical_checkpoint(shapes_dir, trained, tmp_path):
    assert main(train_args(shapes_dir, tmp_path)) == 0
    assert sha(tmp_path / "checkpoint.armc") == sha(trained / "checkpoint.armc")
    assert (tmp_path / "metrics.jsonl").read_bytes() == (trained / "metrics.jsonl").read_bytes()


def test_eval_matches_training_metrics(trained, capsys):
    capsys.readouterr()
    assert main(["eval", "--config", str(trained / "run_manifest.json"),
                 "--checkpoint", str(trained / "checkpoint.armc")]) == 0
    report = json.loads(capsys.readouterr().out)
    last = json.loads((trained / "metrics.jsonl").read_text().splitlines()[-1])
    assert report["accuracy"] == last["test_accuracy"]
    weighted = sum(v["accuracy"] * v["count"] for v in report["per_class"].values()) / report["count"]
    assert weighted == pytest.approx(report["accuracy"], abs=1e-12)


def test_missing_manifest_exit_2_no_outputs(tmp_path):
    out = tmp_path / "never"
    code = main(["train", "--manifest", str(tmp_path / "missing.csv"), "--out", str(out)])
    assert code == 2 and not out.exists()


def test_usage_errors_exit_2(tmp_path):
    assert main(["train"]) == 2
    assert main(["bogus"]) == 2
    assert main(["visualize", "--checkpoint", "x", "--image", "y", "--out", str(tmp_path), "--n", "0"]) == 2


def test_visualize_outputs_and_determinism(trained, shapes_dir, tmp_path):
    image = shapes_dir / "images" / "00000.png"
    args = ["visualize", "--checkpoint", str(trained / "checkpoint.armc"), "--image", str(image), "--n", "4"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    pred = json.loads((tmp_path / "a" / "prediction.json").read_text())
    assert {"predicted_class", "probability", "top_units"} <= set(pred)
    assert len(pred["top_units"]) == 4
    assert len(list((tmp_path / "a" / "maps").glob("unit_*.armap"))) == 4
    for name in ["overlay.png", "panel.png", "prediction.json", "maps/dominant.armap"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_visualize_n1_overlay_equals_unit_overlay(trained, shapes_dir, tmp_path):
    image = shapes_dir / "images" / "00001.png"
    assert main(["visualize", "--checkpoint", str(trained / "checkpoint.armc"), "--image", str(image),
                 "--n", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "overlay.png").read_bytes() == (tmp_path / "panel.png").read_bytes()


def test_visualize_default_n_is_25(tmp_path, shapes_dir):
    spec = NetworkSpec([conv(30, 3), RELU, dense(4), SOFTMAX], (1, 16, 16), 4)
    checkpoint.save(Model(spec, init_params(spec, np.random.default_rng(0)), 0.0, list("abcd")), tmp_path / "m.armc")
    assert main(["visualize", "--checkpoint", str(tmp_path / "m.armc"), "--image",
                 str(shapes_dir / "images" / "00002.png"), "--out", str(tmp_path / "v")]) == 0
    assert len(json.loads((tmp_path / "v" / "prediction.json").read_text())["top_units"]) == 25


def test_inspect_count_identity(trained, shapes_dir, tmp_path):
    run = trained / "run_manifest.json"
    assert main(["inspect-misclassified", "--config", str(run), "--checkpoint", str(trained / "checkpoint.armc"),
                 "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    panels = sorted(tmp_path.glob("error_*.png"))
    assert len(panels) == summary["error_count"]
    assert len(panels) == round((1 - summary["accuracy"]) * summary["test_count"])
    rec = json.loads(panels[0].with_suffix(".json").read_text()) if panels else None
    if rec:
        assert rec["true_label"] != rec["predicted_label"] and len(rec["top_units"]) <= 9


@pytest.fixture
def brightness_problem(tmp_path):
    """Dark vs light images and a hand-set model that separates them perfectly."""
    lines = ["path,label"]
    for i in range(10):
        v = 0 if i % 2 else 255
        Image.fromarray(np.full((8, 8), v, dtype=np.uint8)).save(tmp_path / f"{i}.png")
        lines.append(f"{i}.png,{'dark' if i % 2 else 'light'}")
    (tmp_path / "m.csv").write_text("\n".join(lines) + "\n")
    spec = NetworkSpec([conv(1, 1, padding=0), RELU, dense(2), SOFTMAX], (1, 8, 8), 2)
    params = [ConvParams(np.ones((1, 1, 1, 1)), np.zeros(1)), None,
              DenseParams(np.stack([-np.ones(64), np.ones(64)]), np.array([16.0, -16.0])), None]
    checkpoint.save(Model(spec, params, 0.0, ["dark", "light"]), tmp_path / "perfect.armc")
    return tmp_path


def test_perfect_model_eval_and_empty_inspection(brightness_problem, capsys):
    d = brightness_problem
    common = ["--manifest", str(d / "m.csv"), "--checkpoint", str(d / "perfect.armc"), "--min-count", "1",
              "--train-fraction", "0.5"]
    capsys.readouterr()
    assert main(["eval"] + common) == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] == 1.0
    assert main(["inspect-misclassified", "--out", str(d / "insp")] + common) == 0
    assert sorted(p.name for p in (d / "insp").iterdir()) == ["summary.json"]
    assert json.loads((d / "insp" / "summary.json").read_text())["error_count"] == 0


def test_forced_errors_one_panel_each(brightness_problem):
    d = brightness_problem
    # swap the classifier rows so every prediction is wrong
    model = checkpoint.load(d / "perfect.armc")
    model.params[2] = DenseParams(model.params[2].weight[::-1].copy(), model.params[2].bias[::-1].copy())
    checkpoint.save(model, d / "wrong.armc")
    assert main(["inspect-misclassified", "--manifest", str(d / "m.csv"), "--checkpoint", str(d / "wrong.armc"),
                 "--min-count", "1", "--train-fraction", "0.5", "--out", str(d / "insp")]) == 0
    summary = json.loads((d / "insp" / "summary.json").read_text())
    assert summary["error_count"] == summary["test_count"] == 5
    assert len(list((d / "insp").glob("error_*.png"))) == 5


def test_config_file_with_flag_override(shapes_dir, tmp_path):
    cfg = {"preset": "shallow", "width": 2, "input_size": 16, "epochs": 1, "batch_size": 8, "min_count": 5,
           "manifest": str(shapes_dir / "manifest.csv"), "seed": 4}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["train", "--config", str(tmp_path / "c.json"), "--seed", "5", "--out", str(tmp_path / "o")]) == 0
    run = json.loads((tmp_path / "o" / "run_manifest.json").read_text())
    assert run["seed"] == 5 and run["epochs"] == 1
    (tmp_path / "bad.json").write_text(json.dumps({"nonsense": 1}))
    assert main(["train", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "p")]) == 2
