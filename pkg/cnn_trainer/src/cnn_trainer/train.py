"""Training loop and test-split prediction for the binary detector."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, RandomSampler

from .dataset import ManifestDataset, RelabeledDataset
from .model import build_model

CHECKPOINT_NAME = "checkpoint.pt"
LOG_NAME = "training_log.json"


@dataclass(frozen=True)
class TrainingProtocol:
    """Fixed training recipe: Adam, batch 32, stepped learning rate.

    The learning rate is 1e-3 through epoch 10, 1e-4 through epoch 20 and
    1e-5 afterwards; an epoch is epoch_size samples drawn uniformly with
    replacement from the train split.
    """

    batch_size: int = 32
    epochs: int = 30
    epoch_size: int = 10_000
    init_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1 or self.epoch_size < 1:
            raise ValueError("batch_size, epochs and epoch_size must be >= 1")

    @classmethod
    def smoke(cls, init_seed: int = 0) -> "TrainingProtocol":
        """Reduced schedule that exercises the full file interface quickly."""
        return cls(epochs=3, epoch_size=2_000, init_seed=init_seed)

    def lr_for_epoch(self, epoch: int) -> float:
        if epoch <= 10:
            return 1e-3
        if epoch <= 20:
            return 1e-4
        return 1e-5


def _shuffled_labels(dataset: ManifestDataset, seed: int) -> RelabeledDataset:
    order = np.random.default_rng(seed).permutation(len(dataset))
    return RelabeledDataset(dataset, dataset.labels[order])


def _mean_loss_and_accuracy(model, loader, loss_fn, limit_batches=None):
    model.eval()
    total, correct, loss_sum = 0, 0, 0.0
    with torch.no_grad():
        for i, (images, labels) in enumerate(loader):
            if limit_batches is not None and i >= limit_batches:
                break
            logits = model(images)
            loss_sum += float(loss_fn(logits, labels)) * len(labels)
            correct += int((logits.argmax(dim=1) == labels).sum())
            total += len(labels)
    return loss_sum / total, correct / total


def train(data_dir, out_dir, protocol: TrainingProtocol | None = None,
          arch: str = "resnet18", randomize_labels: bool = False) -> dict:
    """Train a detector on the train split and write checkpoint plus log.

    Returns the run log (also saved as JSON): initial pre-update loss and
    per-epoch learning rate, mean loss, and training accuracy.
    """
    protocol = protocol or TrainingProtocol()
    base = ManifestDataset(data_dir, "train")
    base.validate_statistics()
    dataset = _shuffled_labels(base, protocol.init_seed) if randomize_labels else base

    model = build_model(arch, protocol.init_seed)
    loss_fn = nn.CrossEntropyLoss()
    probe_loader = DataLoader(dataset, batch_size=protocol.batch_size)
    initial_loss, _ = _mean_loss_and_accuracy(model, probe_loader, loss_fn,
                                              limit_batches=1)

    generator = torch.Generator().manual_seed(protocol.init_seed)
    sampler = RandomSampler(dataset, replacement=True,
                            num_samples=protocol.epoch_size, generator=generator)
    loader = DataLoader(dataset, batch_size=protocol.batch_size, sampler=sampler)
    optimizer = torch.optim.Adam(model.parameters(),
                                 lr=protocol.lr_for_epoch(1))

    epochs = []
    for epoch in range(1, protocol.epochs + 1):
        lr = protocol.lr_for_epoch(epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        total, correct, loss_sum = 0, 0, 0.0
        for images, labels in loader:
            optimizer.zero_grad()
            logits = model(images)
            loss = loss_fn(logits, labels)
            loss.backward()
            optimizer.step()
            loss_sum += float(loss.detach()) * len(labels)
            correct += int((logits.argmax(dim=1) == labels).sum())
            total += len(labels)
        epochs.append({"epoch": epoch, "learningRate": lr,
                       "loss": loss_sum / total, "accuracy": correct / total})

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save({"arch": arch, "stateDict": model.state_dict(),
                "protocol": asdict(protocol),
                "randomizedLabels": randomize_labels},
               out / CHECKPOINT_NAME)
    log = {
        "arch": arch,
        "protocol": asdict(protocol),
        "randomizedLabels": randomize_labels,
        "trainSamples": len(dataset),
        "initialLoss": initial_loss,
        "epochs": epochs,
        "checkpoint": CHECKPOINT_NAME,
    }
    (out / LOG_NAME).write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")
    return log


def load_checkpoint(path) -> nn.Module:
    payload = torch.load(path, map_location="cpu")
    model = build_model(payload["arch"], payload["protocol"]["init_seed"])
    model.load_state_dict(payload["stateDict"])
    model.eval()
    return model


def predict_test_split(checkpoint_path, data_dir, out_file,
                       batch_size: int = 256) -> int:
    """Write one predicted 0/1 label per test sample, in manifest order.

    The output is the predictions format consumed by the benchmark's
    `score` subcommand; returns the number of lines written.
    """
    model = load_checkpoint(checkpoint_path)
    dataset = ManifestDataset(data_dir, "test")
    loader = DataLoader(dataset, batch_size=batch_size)
    predicted = []
    with torch.no_grad():
        for images, _ in loader:
            predicted.extend(model(images).argmax(dim=1).tolist())
    Path(out_file).write_text("".join(f"{int(p)}\n" for p in predicted))
    return len(predicted)
