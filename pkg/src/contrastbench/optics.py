"""Image formation: contrast pattern + background level -> expected-photon Scene.

The camera is an idealized diffraction-limited lens over a noiseless photon
counting sensor.  A scene's lambda map is meanLevel*(1 + c*pattern) blurred
by the lens PSF and resampled to the sensor grid; Poisson sampling happens
downstream in the sensor module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve as _ndconvolve
from scipy.special import j1 as _bessel_j1

from .patterns import ContrastPattern
from .streams import det_matmat

# First/third zeros of J1 (for the Airy pattern's dark rings) and the
# Gaussian FWHM <-> sigma conversion factor 2*sqrt(2*ln 2).
_J1_FIRST_ZERO = 3.8317059702075123
_J1_THIRD_ZERO = 10.173468135062722
_FWHM_PER_SIGMA = 2.3548200450309493

# FWHM of the Airy intensity profile in units of wavelength*fNumber.
AIRY_FWHM_FACTOR = 1.029

_OPTICS_MODES = ("airy", "gaussian", "bypass")
_MAPPINGS = ("oneToOne", "resample")


class ClampingWarning(UserWarning):
    """High-contrast pattern drove expected photon rates negative (clamped)."""


@dataclass(frozen=True)
class CameraConfig:
    """Lens and sensor geometry; defaults model a small diffraction-limited
    f/4 module with 2.8 um pixels at 550 nm and ~300 photons background."""

    f_number: float = 4.0
    focal_length_mm: float = 3.9
    pixel_pitch_um: float = 2.8
    field_of_view_deg: float = 10.0
    sensor_width: int = 238
    sensor_height: int = 238
    wavelength_nm: float = 550.0
    mean_level: float = 300.0
    optics_mode: str = "airy"
    mapping: str = "oneToOne"

    def __post_init__(self):
        if self.f_number <= 0:
            raise ValueError(f"f-number must be positive, got {self.f_number!r}")
        if self.pixel_pitch_um <= 0:
            raise ValueError(f"pixel pitch must be positive, got {self.pixel_pitch_um!r}")
        if self.sensor_width < 1 or self.sensor_height < 1:
            raise ValueError("sensor must be at least 1x1 pixels")
        if self.wavelength_nm <= 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength_nm!r}")
        if self.mean_level < 0:
            raise ValueError(f"mean level must be >= 0, got {self.mean_level!r}")
        if self.optics_mode not in _OPTICS_MODES:
            raise ValueError(f"optics mode must be one of {_OPTICS_MODES}, got {self.optics_mode!r}")
        if self.mapping not in _MAPPINGS:
            raise ValueError(f"mapping must be one of {_MAPPINGS}, got {self.mapping!r}")

    @property
    def nyquist_cycles_per_image(self) -> float:
        return self.sensor_width / 2.0

    @property
    def airy_fwhm_um(self) -> float:
        return AIRY_FWHM_FACTOR * self.wavelength_nm * 1e-3 * self.f_number

    @property
    def airy_first_zero_um(self) -> float:
        return _J1_FIRST_ZERO / math.pi * self.wavelength_nm * 1e-3 * self.f_number

    def as_dict(self) -> dict:
        return {
            "fNumber": self.f_number,
            "focalLength": self.focal_length_mm,
            "pixelPitch": self.pixel_pitch_um,
            "fieldOfView": self.field_of_view_deg,
            "sensorWidth": self.sensor_width,
            "sensorHeight": self.sensor_height,
            "wavelength": self.wavelength_nm,
            "meanLevel": self.mean_level,
            "opticsMode": self.optics_mode,
            "mapping": self.mapping,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraConfig":
        known = {
            "fNumber": "f_number",
            "focalLength": "focal_length_mm",
            "pixelPitch": "pixel_pitch_um",
            "fieldOfView": "field_of_view_deg",
            "sensorWidth": "sensor_width",
            "sensorHeight": "sensor_height",
            "wavelength": "wavelength_nm",
            "meanLevel": "mean_level",
            "opticsMode": "optics_mode",
            "mapping": "mapping",
        }
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown camera config keys: {sorted(unknown)}")
        return cls(**{attr: data[key] for key, attr in known.items() if key in data})


@dataclass(frozen=True)
class Scene:
    """Per-pixel expected photon counts on the sensor grid."""

    width: int
    height: int
    lam: np.ndarray
    mean_level: float
    clipped_fraction: float = 0.0

    def __post_init__(self):
        if self.lam.shape != (self.height, self.width):
            raise ValueError(f"lambda shape {self.lam.shape} != ({self.height}, {self.width})")
        if float(self.lam.min()) < 0:
            raise ValueError("expected photon counts must be non-negative")


def make_psf_kernel(config: CameraConfig, spacing_um: float | None = None) -> np.ndarray:
    """Unit-sum PSF sampled on the pixel grid out to the Airy third zero.

    spacing_um overrides the sample spacing (used when blurring a finer
    scene grid before resampling); defaults to the sensor pixel pitch.
    """
    if config.optics_mode == "bypass":
        raise ValueError("bypass mode has no PSF kernel")
    spacing = config.pixel_pitch_um if spacing_um is None else spacing_um
    if spacing <= 0:
        raise ValueError(f"kernel spacing must be positive, got {spacing!r}")
    lam_um = config.wavelength_nm * 1e-3
    support_um = _J1_THIRD_ZERO / math.pi * lam_um * config.f_number
    radius = max(1, math.ceil(support_um / spacing))
    coords = np.arange(-radius, radius + 1, dtype=np.float64) * spacing
    xx, yy = np.meshgrid(coords, coords)
    r = np.hypot(xx, yy)
    if config.optics_mode == "airy":
        v = math.pi * r / (lam_um * config.f_number)
        kernel = np.ones_like(v)
        nz = v != 0
        kernel[nz] = (2.0 * _bessel_j1(v[nz]) / v[nz]) ** 2
    else:
        sigma = config.airy_fwhm_um / _FWHM_PER_SIGMA
        kernel = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _overlap_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Row-stochastic area-average resampling matrix (n_out, n_in)."""
    ratio = n_in / n_out
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = i * ratio, (i + 1) * ratio
        for j in range(int(math.floor(lo)), min(int(math.ceil(hi)), n_in)):
            m[i, j] = (min(hi, j + 1) - max(lo, j)) / ratio
    return m


def resample_area_average(field: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Separable area-average resampling; preserves constants exactly up to
    floating-point rounding and conserves total flux."""
    rows = _overlap_matrix(out_height, field.shape[0])
    cols = _overlap_matrix(out_width, field.shape[1])
    return det_matmat(det_matmat(rows, field), cols.T)


def render_scene(pattern: ContrastPattern, contrast: float, config: CameraConfig) -> Scene:
    """Build the lambda map meanLevel*(1 + contrast*pattern) after optics.

    Zero contrast (or a degenerate all-zero pattern) short-circuits to an
    exactly constant field so noise-only hypotheses are bit-reproducible.
    Negative rates from high-contrast std-normalized patterns are clamped
    to zero; the clamped-pixel fraction is recorded on the Scene and a
    ClampingWarning is issued.
    """
    if contrast < 0:
        raise ValueError(f"contrast must be >= 0, got {contrast!r}")
    if config.mapping == "oneToOne":
        if (pattern.width, pattern.height) != (config.sensor_width, config.sensor_height):
            raise ValueError(
                f"oneToOne mapping needs a {config.sensor_width}x{config.sensor_height} "
                f"pattern, got {pattern.width}x{pattern.height}")
        spacing = config.pixel_pitch_um
    else:
        if pattern.width * config.sensor_height != pattern.height * config.sensor_width:
            raise ValueError("resample mapping needs matching pattern/sensor aspect ratios")
        spacing = config.sensor_width * config.pixel_pitch_um / pattern.width

    if contrast == 0 or not np.any(pattern.values):
        lam = np.full((config.sensor_height, config.sensor_width), float(config.mean_level))
        return Scene(config.sensor_width, config.sensor_height, lam, config.mean_level)

    pattern_min = float(pattern.values.min())
    if contrast * abs(pattern_min) > 1:
        warnings.warn(
            f"contrast {contrast:g} drives expected rates negative "
            f"(min pattern value {pattern_min:g}); clamping to zero",
            ClampingWarning, stacklevel=2)

    field = config.mean_level * (1.0 + contrast * pattern.values)
    if config.optics_mode != "bypass":
        field = _ndconvolve(field, make_psf_kernel(config, spacing), mode="nearest")
    if config.mapping == "resample":
        field = resample_area_average(field, config.sensor_height, config.sensor_width)
    clipped = float(np.count_nonzero(field < 0)) / field.size
    if clipped:
        field = np.maximum(field, 0.0)
    return Scene(config.sensor_width, config.sensor_height, field,
                 config.mean_level, clipped_fraction=clipped)
