import json

import numpy as np
import pytest
from PIL import Image

from contrastbench.cli import main

SWEEP_CONFIG = {
    "stimulus": {"kind": "harmonic", "freq": 2.0},
    "camera": {"sensorWidth": 16, "sensorHeight": 16, "opticsMode": "bypass"},
    "contrastGrid": [0.004, 0.012, 0.032],
    "trialsPerContrast": 120,
    "detectors": ["io"],
    "replicates": 1,
    "baseSeed": 5,
}

EXPORT_CONFIG = {
    "stimulus": {"kind": "harmonic", "freq": 2.0},
    "camera": {"sensorWidth": 16, "sensorHeight": 16, "opticsMode": "bypass"},
    "contrast": 0.05,
    "trainCount": 4,
    "testCount": 6,
    "baseSeed": 2,
}


def write_json(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def test_sweep_command(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", SWEEP_CONFIG)
    out = tmp_path / "run"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["io"] > 0
    assert (out / "results.csv").exists()
    assert (out / "summary.json").exists()
    assert (out / "config.json").exists()


def test_sweep_workers_flag_overrides_config(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", SWEEP_CONFIG)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    serial = (tmp_path / "a" / "results.csv").read_text()
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"),
                 "--workers", "2"]) == 0
    capsys.readouterr()
    parallel = (tmp_path / "b" / "results.csv").read_text()
    assert parallel == serial
    stored = json.loads((tmp_path / "b" / "config.json").read_text())
    assert stored["config"]["workers"] == 2


def test_multiloc_command(tmp_path, capsys):
    config = dict(SWEEP_CONFIG)
    config["camera"] = {"sensorWidth": 32, "sensorHeight": 32,
                        "opticsMode": "bypass"}
    config["stimulus"] = {"kind": "gabor", "freq": 2.0}
    config["contrastGrid"] = [0.02, 0.06, 0.18]
    config["multiLocation"] = {"locationCounts": [1, 2], "patchWidth": 8,
                               "patchHeight": 8}
    cfg = write_json(tmp_path / "cfg.json", config)
    out = tmp_path / "ml"
    assert main(["multiloc", "--config", cfg, "--out", str(out)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert [e["locationCount"] for e in printed["io"]] == [1, 2]
    header = (out / "results.csv").read_text().splitlines()[0]
    assert header.endswith("locationCount")


def test_multiloc_requires_section(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", SWEEP_CONFIG)
    assert main(["multiloc", "--config", cfg, "--out", str(tmp_path / "x")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "multiLocation" in err["error"]


def test_export_and_score_round_trip(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", EXPORT_CONFIG)
    out = tmp_path / "data"
    assert main(["export-dataset", "--config", cfg, "--out", str(out)]) == 0
    exported = json.loads(capsys.readouterr().out)
    assert exported["trainCount"] == 4 and exported["testCount"] == 6
    labels = np.fromfile(out / "test_labels.bin", dtype=np.uint8)
    preds = tmp_path / "preds.txt"
    preds.write_text("".join(f"{int(v)}\n" for v in labels))
    assert main(["score", "--manifest", exported["manifest"],
                 "--predictions", str(preds)]) == 0
    scored = json.loads(capsys.readouterr().out)
    assert scored["hits"] == 3 and scored["correctRejections"] == 3
    assert scored["misses"] == 0 and scored["falseAlarms"] == 0
    assert scored["dprime"] > 1.5


def test_score_accepts_directory_manifest(tmp_path, capsys):
    cfg = write_json(tmp_path / "cfg.json", EXPORT_CONFIG)
    out = tmp_path / "data"
    assert main(["export-dataset", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    preds = tmp_path / "preds.txt"
    preds.write_text("1\n" * 6)
    assert main(["score", "--manifest", str(out), "--predictions",
                 str(preds)]) == 0
    assert json.loads(capsys.readouterr().out)["dprime"] == 0.0


def test_export_rejects_unknown_keys(tmp_path, capsys):
    bad = dict(EXPORT_CONFIG, epochs=3)
    cfg = write_json(tmp_path / "cfg.json", bad)
    assert main(["export-dataset", "--config", cfg, "--out",
                 str(tmp_path / "x")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "epochs" in err["error"]


def test_pattern_command(tmp_path, capsys):
    spec = write_json(tmp_path / "spec.json",
                      {"kind": "harmonic", "freq": 2.0,
                       "camera": {"sensorWidth": 16, "sensorHeight": 16}})
    out = tmp_path / "p.pgm"
    assert main(["pattern", "--spec", spec, "--out", str(out)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["width"] == 16
    img = np.asarray(Image.open(out))
    assert img.shape == (16, 16)


def test_errors_are_json_on_stderr(tmp_path, capsys):
    bad = dict(SWEEP_CONFIG, contrastGrid=[-0.1])
    cfg = write_json(tmp_path / "cfg.json", bad)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x")]) == 1
    captured = capsys.readouterr()
    err = json.loads(captured.err)
    assert err["type"] == "ValueError"
    assert "contrastGrid" in err["error"]
    assert captured.out == ""


def test_missing_config_file_fails_cleanly(tmp_path, capsys):
    assert main(["sweep", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "x")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["type"] == "FileNotFoundError"


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip()
