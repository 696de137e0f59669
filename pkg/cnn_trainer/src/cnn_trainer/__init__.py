"""CNN detector training on exported photon-count datasets."""

from .dataset import ManifestDataset, RelabeledDataset, load_manifest
from .model import ARCHITECTURES, build_model
from .train import (CHECKPOINT_NAME, LOG_NAME, TrainingProtocol,
                    load_checkpoint, predict_test_split, train)

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "CHECKPOINT_NAME",
    "LOG_NAME",
    "ManifestDataset",
    "RelabeledDataset",
    "TrainingProtocol",
    "build_model",
    "load_checkpoint",
    "load_manifest",
    "predict_test_split",
    "train",
    "__version__",
]
