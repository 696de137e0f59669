import json
import math

import numpy as np
import pytest
import torch
from torch.utils.data import DataLoader

from cnn_trainer.dataset import ManifestDataset
from cnn_trainer.train import (
    CHECKPOINT_NAME,
    LOG_NAME,
    TrainingProtocol,
    load_checkpoint,
    predict_test_split,
    train,
)

from datagen import write_dataset

# enough steps for the BatchNorm running statistics to settle before the
# eval-mode prediction checks (momentum 0.1 needs a few dozen batches)
TINY = TrainingProtocol(batch_size=16, epochs=3, epoch_size=256, init_seed=0)


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("dataset")
    write_dataset(directory, train=32, test=24, seed=5)
    return directory


@pytest.fixture(scope="module")
def run(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    log = train(data_dir, out, protocol=TINY)
    return out, log


def test_learning_rate_schedule_boundaries():
    protocol = TrainingProtocol()
    assert protocol.lr_for_epoch(1) == 1e-3
    assert protocol.lr_for_epoch(10) == 1e-3
    assert protocol.lr_for_epoch(11) == 1e-4
    assert protocol.lr_for_epoch(20) == 1e-4
    assert protocol.lr_for_epoch(21) == 1e-5
    assert protocol.lr_for_epoch(30) == 1e-5


def test_default_and_smoke_protocols():
    default = TrainingProtocol()
    assert (default.batch_size, default.epochs, default.epoch_size) == (32, 30, 10_000)
    smoke = TrainingProtocol.smoke(init_seed=9)
    assert (smoke.epochs, smoke.epoch_size, smoke.init_seed) == (3, 2_000, 9)
    assert smoke.batch_size == 32


def test_protocol_validation():
    with pytest.raises(ValueError):
        TrainingProtocol(batch_size=0)
    with pytest.raises(ValueError):
        TrainingProtocol(epochs=0)


def test_train_writes_checkpoint_and_log(run):
    out, log = run
    assert (out / CHECKPOINT_NAME).exists()
    stored = json.loads((out / LOG_NAME).read_text())
    assert stored == log


def test_initial_loss_is_near_chance(run):
    _, log = run
    assert log["initialLoss"] == pytest.approx(math.log(2), abs=0.2)


def test_log_records_schedule_and_progress(run):
    _, log = run
    epochs = log["epochs"]
    assert [e["epoch"] for e in epochs] == [1, 2, 3]
    assert all(e["learningRate"] == 1e-3 for e in epochs)
    assert log["trainSamples"] == 32
    assert log["randomizedLabels"] is False
    # the synthetic step stimulus is trivially separable: training must bite
    assert epochs[-1]["loss"] < log["initialLoss"]
    assert epochs[-1]["accuracy"] > 0.9


def test_checkpoint_round_trip_reproduces_logits(run, data_dir):
    out, _ = run
    model = load_checkpoint(out / CHECKPOINT_NAME)
    again = load_checkpoint(out / CHECKPOINT_NAME)
    images, _ = next(iter(DataLoader(ManifestDataset(data_dir, "test"),
                                     batch_size=8)))
    with torch.no_grad():
        assert torch.equal(model(images), again(images))


def test_predictions_match_manifest_order_and_argmax(run, data_dir, tmp_path):
    out, _ = run
    pred_file = tmp_path / "predictions.txt"
    count = predict_test_split(out / CHECKPOINT_NAME, data_dir, pred_file)
    assert count == 24
    lines = pred_file.read_text().splitlines()
    assert len(lines) == 24
    assert set(lines) <= {"0", "1"}

    model = load_checkpoint(out / CHECKPOINT_NAME)
    ds = ManifestDataset(data_dir, "test")
    images = torch.stack([ds[i][0] for i in range(len(ds))])
    with torch.no_grad():
        expected = model(images).argmax(dim=1).tolist()
    assert [int(line) for line in lines] == expected


def test_prediction_is_deterministic(run, data_dir, tmp_path):
    out, _ = run
    first = tmp_path / "a.txt"
    second = tmp_path / "b.txt"
    predict_test_split(out / CHECKPOINT_NAME, data_dir, first)
    predict_test_split(out / CHECKPOINT_NAME, data_dir, second)
    assert first.read_bytes() == second.read_bytes()


def test_trained_model_beats_chance_on_test_split(run, data_dir, tmp_path):
    out, _ = run
    pred_file = tmp_path / "p.txt"
    predict_test_split(out / CHECKPOINT_NAME, data_dir, pred_file)
    predicted = np.array([int(x) for x in pred_file.read_text().split()])
    truth = np.fromfile(data_dir / "test_labels.bin", dtype=np.uint8)
    assert (predicted == truth).mean() > 0.9


def test_randomized_labels_are_a_permutation(data_dir, tmp_path):
    protocol = TrainingProtocol(batch_size=16, epochs=1, epoch_size=16,
                                init_seed=3)
    log = train(data_dir, tmp_path / "shuffled", protocol=protocol,
                randomize_labels=True)
    assert log["randomizedLabels"] is True
    payload = torch.load(tmp_path / "shuffled" / CHECKPOINT_NAME,
                         map_location="cpu")
    assert payload["randomizedLabels"] is True


def test_train_rejects_bad_architecture(data_dir, tmp_path):
    with pytest.raises(ValueError, match="arch"):
        train(data_dir, tmp_path / "x", protocol=TINY, arch="lenet")
