import json
import subprocess
import sys

import numpy as np
import pytest

from tryon.cli import main
from tryon.config import OUT_ROOT_ENV
from tryon.synthgen import (
    ClothAttributes,
    ClothType,
    HumanAttributes,
    generate_cloth_mask,
    generate_human_mask,
    read_mask,
    write_mask,
)

FAST = ["--resolution", "64", "--epochs", "1", "--batch-size", "8"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_line(err):
    lines = [l for l in err.splitlines() if l.strip()]
    assert len(lines) == 1, err
    return json.loads(lines[0])


def test_missing_config_exits_2(capsys, tmp_path):
    code, _, err = run(capsys, "gen-data", "--config", tmp_path / "nope.yaml", "--out", tmp_path / "d")
    assert code == 2
    assert error_line(err)["error"] == "config"


def test_bad_config_value_exits_2(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("ae:\n  lr: -1\n")
    code, _, err = run(capsys, "train-ae", "--config", cfg, "--data", tmp_path)
    assert code == 2 and error_line(err)["exit_code"] == 2
    cfg.write_text("ae:\n  learning_rate: 0.1\n")
    assert run(capsys, "train-ae", "--config", cfg, "--data", tmp_path)[0] == 2


def test_cloth_jitter_out_of_range_exits_2(capsys, tmp_path):
    code, _, err = run(capsys, "train-vton", "--data", tmp_path, "--run-dir", tmp_path, "--cloth-jitter", 2)
    assert code == 2 and "cloth_jitter" in error_line(err)["message"]


def test_gen_data_is_deterministic(capsys, tmp_path):
    _, out_a, _ = run(capsys, "gen-data", "--n", 16, "--seed", 7, "--resolution", 64, "--out", tmp_path / "a")
    _, out_b, _ = run(capsys, "gen-data", "--n", 16, "--seed", 7, "--resolution", 64, "--out", tmp_path / "b")
    a, b = json.loads(out_a), json.loads(out_b)
    assert a["manifest_sha256"] == b["manifest_sha256"]
    assert (tmp_path / "a" / "manifest.jsonl").read_bytes() == (tmp_path / "b" / "manifest.jsonl").read_bytes()


def test_train_vton_without_ae_is_stage_order_error(capsys, tmp_path):
    code, _, err = run(capsys, "train-vton", "--data", tmp_path / "data", "--run-dir", tmp_path / "runs")
    assert code == 3
    e = error_line(err)
    assert e["error"] == "stage_order" and e["missing_stage"] == "train-ae"
    assert "train-ae" in e["message"]


def test_eval_without_vton_is_stage_order_error(capsys, tmp_path):
    code, _, err = run(capsys, "eval", "--run-dir", tmp_path)
    assert code == 3 and error_line(err)["missing_stage"] == "train-vton"


def test_unreadable_checkpoint_exits_4(capsys, tmp_path):
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"garbage")
    code, _, err = run(capsys, "eval", "--checkpoint", bad, "--data", tmp_path)
    assert code == 4 and error_line(err)["error"] == "data"


def test_missing_dataset_exits_4(capsys, tmp_path):
    code, _, err = run(capsys, "train-ae", "--data", tmp_path / "missing", *FAST)
    assert code == 4 and "manifest" in error_line(err)["message"]


def test_out_root_env_relocates_relative_paths(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ROOT_ENV, str(tmp_path / "root"))
    code, out, _ = run(capsys, "gen-data", "--n", 4, "--resolution", 64, "--out", "ds")
    assert code == 0
    assert (tmp_path / "root" / "ds" / "manifest.jsonl").is_file()
    assert json.loads(out)["out"] == str(tmp_path / "root" / "ds")


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    data, runs = root / "data", root / "runs"
    assert main(["gen-data", "--n", "20", "--resolution", "64", "--seed", "1", "--out", str(data)]) == 0
    common = ["--data", str(data), "--run-dir", str(runs), *FAST]
    for cmd in (["train-ae"], ["train-ac"], ["train-vton"], ["train-vton", "--no-ac"]):
        assert main([*cmd, *common]) == 0
    return root


def test_pipeline_writes_all_checkpoints(pipeline):
    for name in ("ae.pt", "ac.pt", "vton.pt", "vton_noac.pt"):
        assert (pipeline / "runs" / name).is_file()


def test_eval_prints_ablation_table(pipeline, capsys):
    code, out, _ = run(capsys, "eval", "--data", pipeline / "data", "--run-dir", pipeline / "runs")
    assert code == 0
    assert "w/ AC" in out and "w/o AC" in out
    report = json.loads((pipeline / "runs" / "report_vton.json").read_text())
    assert report["schema_version"] == 1 and report["n_samples"] == 4
    assert report["extra"]["seed"] is not None and "config" in report["extra"]


def test_eval_stage_one_checkpoints(pipeline, capsys):
    runs = pipeline / "runs"
    code, out, _ = run(capsys, "eval", "--data", pipeline / "data", "--checkpoint", runs / "ae.pt",
                       "--checkpoint", runs / "ac.pt")
    assert code == 0
    lines = [json.loads(l) for l in out.splitlines()]
    assert "iou" in lines[0] and "type_accuracy" in lines[1]


def _masks(tmp_path, res_user=64, res_cloth=64):
    human, cloth = HumanAttributes(170, 70), ClothAttributes(ClothType.T_SHIRT, 100, 60, 20)
    write_mask(tmp_path / "u.png", generate_human_mask(human, res_user))
    write_mask(tmp_path / "c.png", generate_cloth_mask(cloth, res_cloth))
    return ["--user", tmp_path / "u.png", "--cloth", tmp_path / "c.png", "--type", "t-shirt", "--chest", 100,
            "--length", 60, "--sleeve", 20, "--height", 170, "--weight", 70]


def test_infer_writes_masks_and_attributes(pipeline, capsys, tmp_path):
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "infer", "--checkpoint", pipeline / "runs" / "vton.pt", *_masks(tmp_path),
                       "--out", out_dir)
    assert code == 0
    for name in ("body.png", "cloth.png"):
        assert read_mask(out_dir / name).shape == (64, 64)
    record = json.loads((out_dir / "attributes.json").read_text())
    assert record == json.loads(out)
    assert record["estimated"]["cloth_type"] in ("t-shirt", "long-sleeve", "dress", "blazer")
    assert sum(record["estimated"]["type_probabilities"].values()) == pytest.approx(1.0, abs=1e-6)
    assert np.isfinite(record["estimated"]["total_length"])


def test_infer_resolution_mismatch(pipeline, capsys, tmp_path):
    code, _, err = run(capsys, "infer", "--checkpoint", pipeline / "runs" / "vton.pt",
                       *_masks(tmp_path, res_cloth=128), "--out", tmp_path / "o")
    assert code == 4
    e = error_line(err)
    assert e["error"] == "shape" and "resolution mismatch" in e["message"]


def test_infer_rejects_non_vton_checkpoint(pipeline, capsys, tmp_path):
    code, _, err = run(capsys, "infer", "--checkpoint", pipeline / "runs" / "ae.pt", *_masks(tmp_path))
    assert code == 4 and error_line(err)["exit_code"] == 4


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tryon", "train-vton", "--data", str(tmp_path),
                           "--run-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 3
    assert json.loads(proc.stderr.strip())["missing_stage"] == "train-ae"
