import json

import numpy as np
import pytest
from PIL import Image

from doodleseg.cli import main
from doodleseg.model import count_parameters


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "ds"
    rc = main(["synth", "--out", str(root), "--classes", "3", "--per-class", "8",
               "--side", "64", "--seed", "7"])
    assert rc == 0
    return root


def test_synth_writes_dataset_and_manifest(synth_dir):
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    assert len({e["id"] for e in manifest["entries"]}) == 24
    assert manifest["seed"] == 7
    assert (synth_dir / "ellipse" / "images").is_dir()
    assert (synth_dir / "ring" / "masks").is_dir()


def test_synth_respects_contract_count(tmp_path):
    out = tmp_path / "ds300"
    rc = main(["synth", "--out", str(out), "--classes", "3", "--per-class", "100",
               "--side", "64", "--seed", "7"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len({e["id"] for e in manifest["entries"]}) == 300


@pytest.fixture(scope="module")
def trained_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-train")
    rc = main(["train", "--data", str(synth_dir), "--out", str(out),
               "--side", "64", "--filters", "2,4,8,16,32",
               "--epochs", "1", "--batch-size", "4",
               "--seeds", "5", "--folds", "0", "--quiet"])
    assert rc == 0
    return out


def test_train_then_eval_pipeline(trained_dir, synth_dir, capsys):
    report = json.loads((trained_dir / "report.json").read_text())
    assert set(report["rows"]) == {"ellipse", "rectangle", "ring", "All"}
    ckpts = list(trained_dir.glob("*.ckpt"))
    assert len(ckpts) == 1
    assert (trained_dir / "run5_fold0.jsonl").exists()

    rc = main(["eval", "--checkpoint", str(ckpts[0]), "--data", str(synth_dir),
               "--out", str(trained_dir / "eval.json")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "All" in out and "Dice" in out
    saved = json.loads((trained_dir / "eval.json").read_text())
    assert len(saved["rows"]) == 4


def test_info_prints_exact_parameter_count(trained_dir, capsys):
    ckpt = next(iter(trained_dir.glob("*.ckpt")))
    rc = main(["info", "--checkpoint", str(ckpt)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    from doodleseg.checkpoint import load_checkpoint
    model, _ = load_checkpoint(ckpt)
    assert info["parameter_count"] == count_parameters(model)
    assert info["provenance"]["class_names"] == ["ellipse", "rectangle", "ring"]


def test_predict_writes_mask(trained_dir, synth_dir, tmp_path):
    ckpt = next(iter(trained_dir.glob("*.ckpt")))
    image = next((synth_dir / "ellipse" / "images").glob("*.png"))
    doodle = synth_dir / "ellipse" / "doodles" / image.name
    out = tmp_path / "mask.png"
    rc = main(["predict", "--checkpoint", str(ckpt), "--image", str(image),
               "--doodle", str(doodle), "--class-id", "0",
               "--out", str(out), "--prob-out", str(tmp_path / "prob.npy")])
    assert rc == 0
    mask = np.asarray(Image.open(out))
    assert mask.shape == (64, 64)
    probs = np.load(tmp_path / "prob.npy")
    assert probs.dtype == np.float32
    assert ((probs >= 0) & (probs <= 1)).all()


def test_predict_class_out_of_range_fails(trained_dir, synth_dir, tmp_path, capsys):
    ckpt = next(iter(trained_dir.glob("*.ckpt")))
    image = next((synth_dir / "ellipse" / "images").glob("*.png"))
    rc = main(["predict", "--checkpoint", str(ckpt), "--image", str(image),
               "--doodle", str(image), "--class-id", "99",
               "--out", str(tmp_path / "m.png")])
    assert rc == 1
    assert "out of range" in capsys.readouterr().err


def test_preprocess_pipeline(tmp_path):
    src = tmp_path / "raw"
    rc = main(["synth", "--out", str(src), "--per-class", "8", "--side", "64",
               "--seed", "3"])
    assert rc == 0
    out = tmp_path / "processed"
    rc = main(["preprocess", "--data", str(src), "--out", str(out),
               "--side", "64", "--seed", "3"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["class_names"] == ["ellipse", "rectangle", "ring"]
    img = np.asarray(Image.open(next((out / "ellipse" / "images").glob("*.png"))))
    assert img.shape == (64, 64)


def test_runtime_error_exits_1(tmp_path, capsys):
    rc = main(["info", "--checkpoint", str(tmp_path / "missing.ckpt")])
    assert rc == 1
    assert "doodleseg info:" in capsys.readouterr().err


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["train"])    # missing required flags
    assert exc.value.code == 2


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
