"""Photon-noise detection benchmark.

Simulates a diffraction-limited camera imaging known spatial patterns under
Poisson photon noise and measures how much contrast a detector needs to
reach a criterion d' — for the Bayes-optimal ideal observer, a linear SVM,
and (through dataset export) external classifiers such as CNNs.
"""

__version__ = "0.1.0"

from .metrics import (ConfusionCounts, SweepCurve, SweepPoint, TARGET_DPRIME,
                      ThresholdNotBracketed, analytic_d_prime, corrected_rates,
                      d_prime, inverse_normal_cdf, threshold_at)
from .optics import CameraConfig, Scene, make_psf_kernel, render_scene
from .patterns import (AutomatonSpec, ContrastPattern, MultiLocationLayout,
                       block_scramble, grid_layout, load_contrast_image,
                       make_automaton, make_disk, make_gabor, make_harmonic,
                       make_synthetic_face, place_at_location)
from .sensor import SensorSample, sample, sample_batch
from .observer import (HypothesisSet, decide, decide_batch, detect_present,
                       detect_present_batch, log_likelihood)
from .svm import LinearModel, load_model, predict, save_model, train_svm
from .harness import (ExperimentConfig, MultiLocationRun, build_pattern,
                      contrast_for_dprime, export_dataset, load_manifest,
                      run_multi_location, run_sweep, score_predictions)

__all__ = [
    "__version__",
    "AutomatonSpec", "CameraConfig", "ConfusionCounts", "ContrastPattern",
    "ExperimentConfig", "HypothesisSet", "LinearModel", "MultiLocationLayout",
    "MultiLocationRun", "Scene", "SensorSample", "SweepCurve", "SweepPoint",
    "TARGET_DPRIME", "ThresholdNotBracketed",
    "analytic_d_prime", "block_scramble", "build_pattern",
    "contrast_for_dprime", "corrected_rates", "d_prime", "decide",
    "decide_batch", "detect_present", "detect_present_batch", "export_dataset",
    "grid_layout", "inverse_normal_cdf", "load_contrast_image",
    "load_manifest", "load_model", "log_likelihood", "make_automaton",
    "make_disk", "make_gabor", "make_harmonic", "make_psf_kernel",
    "make_synthetic_face", "place_at_location", "predict", "render_scene",
    "run_multi_location", "run_sweep", "sample", "sample_batch", "save_model",
    "score_predictions", "threshold_at", "train_svm",
]
