"""Bayesian ideal observer: exact Poisson log-likelihood hypothesis selection.

The observer knows every candidate lambda map exactly (signal-known-exactly)
and picks argmax_h [ln prior_h + sum_i (N_i ln lam_hi - lam_hi - ln N_i!)].
The ln N! term is identical across hypotheses for a fixed sample, so the
batched decision path drops it; logLikelihood() itself includes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .metrics import LAMBDA_FLOOR
from .optics import Scene
from .sensor import SensorSample
from .streams import det_dot, det_matmat

_PRIOR_TOL = 1e-9


@dataclass(frozen=True)
class HypothesisSet:
    """Candidate lambda maps with prior probabilities; index 0 is noise-only
    by convention for present/absent reduction."""

    scenes: tuple[Scene, ...]
    priors: tuple[float, ...]

    def __post_init__(self):
        if not self.scenes:
            raise ValueError("hypothesis set needs at least one scene")
        if len(self.priors) != len(self.scenes):
            raise ValueError(f"{len(self.priors)} priors for {len(self.scenes)} scenes")
        if any(p <= 0 for p in self.priors):
            raise ValueError("all priors must be > 0")
        if abs(sum(self.priors) - 1.0) > _PRIOR_TOL:
            raise ValueError(f"priors sum to {sum(self.priors)!r}, expected 1")
        dims = {(s.width, s.height) for s in self.scenes}
        if len(dims) != 1:
            raise ValueError(f"hypothesis scenes disagree on dimensions: {sorted(dims)}")

    @classmethod
    def equal_priors(cls, scenes) -> "HypothesisSet":
        scenes = tuple(scenes)
        if not scenes:
            raise ValueError("hypothesis set needs at least one scene")
        return cls(scenes, (1.0 / len(scenes),) * len(scenes))

    @property
    def n_pixels(self) -> int:
        return self.scenes[0].width * self.scenes[0].height


def log_likelihood(sample: SensorSample, scene: Scene) -> float:
    """ln P(counts | scene) = sum_i [N_i ln lam_i - lam_i - ln N_i!].

    lam is clamped below at LAMBDA_FLOOR so a photon landing on a zero-rate
    pixel of a mismatched hypothesis yields a finite (very negative) value.
    """
    if (sample.width, sample.height) != (scene.width, scene.height):
        raise ValueError(
            f"sample is {sample.width}x{sample.height}, scene is {scene.width}x{scene.height}")
    counts = sample.counts.ravel().astype(np.float64)
    lam = np.maximum(scene.lam.ravel(), LAMBDA_FLOOR)
    return det_dot(counts, np.log(lam)) - float(lam.sum()) - float(gammaln(counts + 1.0).sum())


def _score_matrix(counts: np.ndarray, hset: HypothesisSet) -> np.ndarray:
    """(trials, hypotheses) scores ln prior + loglik, omitting ln N! (common
    to all hypotheses for a given row)."""
    if counts.ndim != 2 or counts.shape[1] != hset.n_pixels:
        raise ValueError(f"counts matrix shape {counts.shape} does not match "
                         f"{hset.n_pixels} hypothesis pixels")
    log_lam = np.stack([np.log(np.maximum(s.lam.ravel(), LAMBDA_FLOOR)) for s in hset.scenes],
                       axis=1)
    offsets = np.array([np.log(p) - float(s.lam.sum())
                        for s, p in zip(hset.scenes, hset.priors)])
    return det_matmat(counts.astype(np.float64), log_lam) + offsets


def decide_batch(counts: np.ndarray, hset: HypothesisSet) -> np.ndarray:
    """Most-probable hypothesis index per row; ties go to the lowest index."""
    return np.argmax(_score_matrix(counts, hset), axis=1)


def decide(sample: SensorSample, hset: HypothesisSet) -> int:
    """argmax_h [ln prior_h + logLikelihood(sample, scene_h)], ties toward
    the lowest index (hypothesis 0 = noise-only)."""
    return int(decide_batch(sample.counts.reshape(1, -1), hset)[0])


def detect_present_batch(counts: np.ndarray, hset: HypothesisSet) -> np.ndarray:
    """Boolean signal-present per row: any non-noise hypothesis wins."""
    if len(hset.scenes) < 2:
        raise ValueError("present/absent reduction needs >= 2 hypotheses")
    return decide_batch(counts, hset) != 0


def detect_present(sample: SensorSample, hset: HypothesisSet) -> bool:
    return bool(detect_present_batch(sample.counts.reshape(1, -1), hset)[0])
