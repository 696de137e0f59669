"""Linear maximum-margin classifier on flattened sensor samples.

Training solves the L1 (hinge) soft-margin SVM in the dual by coordinate
descent with the bias folded in as a constant augmented feature.  Features
are raw photon counts scaled by 1/meanLevel: one global constant, so the
achievable classifier family is unchanged but the solver is well
conditioned with C = 1 at ~300-photon backgrounds.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .streams import det_matvec, stream

_MODEL_MAGIC = b"CBLSVM01"
_ORDER_SEED = 0x5CD0  # fixed: pass ordering must not vary between runs


@dataclass(frozen=True)
class LinearModel:
    """Trained hyperplane: label = sign(w . x + b), with x = counts/meanLevel."""

    weights: np.ndarray
    bias: float
    training_meta: dict

    def __post_init__(self):
        if self.weights.ndim != 1:
            raise ValueError("weights must be a flat vector")


def _features(counts: np.ndarray, mean_level: float) -> np.ndarray:
    if mean_level <= 0:
        raise ValueError(f"mean level must be positive, got {mean_level!r}")
    return np.asarray(counts, dtype=np.float32) * np.float32(1.0 / mean_level)


def hinge_objective(model: LinearModel, counts: np.ndarray, labels: np.ndarray,
                    mean_level: float, c_value: float) -> float:
    """Primal objective 0.5*(|w|^2 + b^2) + C*sum(max(0, 1 - y*f(x))) with the
    bias regularized as the augmented coordinate (matches the trainer)."""
    x = _features(counts, mean_level)
    y = np.where(np.asarray(labels) > 0, 1.0, -1.0)
    w = model.weights.astype(np.float64)
    margins = 1.0 - y * (det_matvec(x, w) + model.bias)
    reg = 0.5 * (float(np.dot(w, w)) + model.bias ** 2)
    return reg + c_value * float(np.maximum(margins, 0.0).sum())


def train_svm(counts: np.ndarray, labels: np.ndarray, mean_level: float,
              c_value: float = 1.0, tol: float = 0.001, max_iter: int = 1000) -> LinearModel:
    """Dual coordinate descent on the hinge-loss SVM (0 <= alpha_i <= C).

    One outer pass visits every sample in a seeded random order; the pass
    order is derived from a fixed stream so training is reproducible.
    Stopping: the spread of projected gradients over a pass falls below tol.
    Hitting max_iter is recorded as converged=False, not an error.
    """
    counts = np.asarray(counts)
    labels = np.asarray(labels)
    if counts.ndim != 2 or counts.shape[0] != labels.shape[0]:
        raise ValueError(f"need matching sample matrix and labels, got "
                         f"{counts.shape} vs {labels.shape}")
    if c_value <= 0:
        raise ValueError(f"C must be positive, got {c_value!r}")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("training data contains a single class")

    x = _features(counts, mean_level)
    y = np.where(labels > 0, 1.0, -1.0)
    n = x.shape[0]
    # Augmented-feature diagonal: Q_ii = x_i.x_i + 1 (the +1 is the bias column).
    q_diag = np.einsum("ij,ij->i", x, x, optimize=False).astype(np.float64) + 1.0
    alpha = np.zeros(n)
    w = np.zeros(x.shape[1], dtype=np.float64)
    b = 0.0
    order_rng = stream(_ORDER_SEED, "svm-pass-order", n)

    converged = False
    passes = 0
    for passes in range(1, max_iter + 1):
        pg_max, pg_min = -np.inf, np.inf
        for i in order_rng.permutation(n):
            yi = y[i]
            g = yi * (float(np.einsum("i,i->", w, x[i], optimize=False)) + b) - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(g, 0.0)
            elif a == c_value:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0:
                new_a = min(max(a - g / q_diag[i], 0.0), c_value)
                if new_a != a:
                    step = (new_a - a) * yi
                    w += step * x[i]
                    b += step
                    alpha[i] = new_a
        if pg_max - pg_min < tol:
            converged = True
            break

    model = LinearModel(w, float(b), {})
    meta = {
        "iterations": passes,
        "converged": converged,
        "objective": hinge_objective(model, counts, labels, mean_level, c_value),
        "C": c_value,
        "tol": tol,
        "maxIter": max_iter,
        "featureScale": 1.0 / mean_level,
        "trainingSamples": int(n),
    }
    return LinearModel(w, float(b), meta)


def decision_values(model: LinearModel, counts: np.ndarray, mean_level: float) -> np.ndarray:
    """w . x + b per row (x = counts/meanLevel)."""
    counts = np.asarray(counts)
    squeeze = counts.ndim == 1
    if squeeze:
        counts = counts.reshape(1, -1)
    if counts.shape[1] != model.weights.size:
        raise ValueError(f"sample has {counts.shape[1]} pixels, model expects "
                         f"{model.weights.size}")
    scores = det_matvec(_features(counts, mean_level), model.weights.astype(np.float64))
    scores = scores + model.bias
    return scores[0] if squeeze else scores


def predict(model: LinearModel, counts: np.ndarray, mean_level: float) -> np.ndarray:
    """Class labels per row: 1 = signal where w.x + b > 0, else 0 (noise)."""
    scores = decision_values(model, counts, mean_level)
    return (np.asarray(scores) > 0).astype(np.int64)


def save_model(model: LinearModel, path) -> None:
    """Flat binary record (magic, dimension, bias, weights, all little-endian)
    plus a JSON sidecar <path>.json holding trainingMeta."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<I", model.weights.size))
        fh.write(struct.pack("<d", model.bias))
        fh.write(model.weights.astype("<f8").tobytes())
    sidecar = {
        "format": "little-endian: 8-byte magic, uint32 dimension, float64 bias, "
                  "float64 weights[dimension]",
        "dimension": int(model.weights.size),
        "bias": model.bias,
        "trainingMeta": model.training_meta,
    }
    with open(path.with_name(path.name + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> LinearModel:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(_MODEL_MAGIC))
        if magic != _MODEL_MAGIC:
            raise ValueError(f"{path} is not a linear model file")
        (dim,) = struct.unpack("<I", fh.read(4))
        (bias,) = struct.unpack("<d", fh.read(8))
        weights = np.frombuffer(fh.read(8 * dim), dtype="<f8").copy()
    if weights.size != dim:
        raise ValueError(f"model file truncated: expected {dim} weights, got {weights.size}")
    sidecar_path = path.with_name(path.name + ".json")
    meta = {}
    if sidecar_path.exists():
        with open(sidecar_path) as fh:
            meta = json.load(fh).get("trainingMeta", {})
    return LinearModel(weights, bias, meta)
