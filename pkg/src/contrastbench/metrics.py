"""Signal-detection scoring: corrected rates, d', analytic d', thresholds.

Empirical discriminability is Z(hit rate) - Z(false-alarm rate) on rates
corrected for extreme counts (the +0.5 / +1 adjustment), which keeps d'
finite even at perfect performance.  The analytic route approximates the
Poisson log-likelihood-ratio statistic with a normal density and needs
only the two expected-count maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Floor applied to expected counts inside logarithms; matches the clamp
# used by the observer when scoring mismatched hypotheses.
LAMBDA_FLOOR = 1e-12

TARGET_DPRIME = 1.5


class ThresholdNotBracketed(RuntimeError):
    """No adjacent pair of sweep points brackets the target d'."""

    def __init__(self, message, points):
        super().__init__(message)
        self.points = list(points)


@dataclass(frozen=True)
class ConfusionCounts:
    hits: int
    misses: int
    false_alarms: int
    correct_rejections: int

    def __post_init__(self):
        for name in ("hits", "misses", "false_alarms", "correct_rejections"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def n_signal(self) -> int:
        return self.hits + self.misses

    @property
    def n_noise(self) -> int:
        return self.false_alarms + self.correct_rejections

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.hits + other.hits,
            self.misses + other.misses,
            self.false_alarms + other.false_alarms,
            self.correct_rejections + other.correct_rejections,
        )


def corrected_rates(counts: ConfusionCounts) -> tuple[float, float]:
    """Hit and false-alarm rates with the +0.5 / +1 extreme-count adjustment."""
    if counts.n_signal == 0 or counts.n_noise == 0:
        raise ValueError("need at least one signal trial and one noise trial")
    hit_rate = (0.5 + counts.hits) / (1 + counts.n_signal)
    fa_rate = (0.5 + counts.false_alarms) / (1 + counts.n_noise)
    return hit_rate, fa_rate


# Rational approximation for the inverse standard-normal CDF (Acklam's
# coefficients), sharpened by one Halley step on the erfc-based CDF.
_INV_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_INV_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_INV_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_INV_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def inverse_normal_cdf(p: float) -> float:
    """z such that P(N(0,1) <= z) = p, accurate to well below 1e-9."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly in (0, 1), got {p!r}")
    a, b, c, d = _INV_A, _INV_B, _INV_C, _INV_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    # One Halley refinement against Phi(x) = erfc(-x / sqrt(2)) / 2.
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def d_prime(counts: ConfusionCounts) -> float:
    """Z(hit rate) - Z(false-alarm rate) on the corrected rates."""
    hit_rate, fa_rate = corrected_rates(counts)
    return inverse_normal_cdf(hit_rate) - inverse_normal_cdf(fa_rate)


def analytic_d_prime(alpha, beta, floor: float = LAMBDA_FLOOR) -> float:
    """Normal-approximation d' between two Poisson expected-count maps.

    Pixels with identical rates contribute nothing; pixels where exactly
    one rate is zero are evaluated with the rate floored at ``floor``.
    Returns 0.0 when every term vanishes.
    """
    a = np.asarray(alpha, dtype=np.float64).ravel()
    b = np.asarray(beta, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"map sizes differ: {a.shape} vs {b.shape}")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("expected-count maps must be non-negative")
    mask = a != b
    if not mask.any():
        return 0.0
    am = np.maximum(a[mask], floor)
    bm = np.maximum(b[mask], floor)
    log_ratio = np.log(bm / am)
    numerator = float(np.sum((bm - am) * log_ratio))
    denominator = math.sqrt(0.5 * float(np.sum((am + bm) * log_ratio * log_ratio)))
    if denominator == 0.0:
        return 0.0
    return numerator / denominator


@dataclass(frozen=True)
class SweepPoint:
    contrast: float
    dprime: float
    counts: ConfusionCounts | None = None


@dataclass
class SweepCurve:
    """Ordered (contrast, d') measurements plus the interpolated threshold."""

    points: list[SweepPoint]
    threshold_contrast: float | None = None
    sensitivity: float | None = None

    def __post_init__(self):
        contrasts = [p.contrast for p in self.points]
        if any(c2 <= c1 for c1, c2 in zip(contrasts, contrasts[1:])):
            raise ValueError("sweep contrasts must be strictly increasing")
        if (self.threshold_contrast is None) != (self.sensitivity is None):
            raise ValueError("sensitivity must be present exactly when the threshold is")

    @classmethod
    def from_points(cls, points, target: float = TARGET_DPRIME) -> "SweepCurve":
        """Build a curve, attaching the threshold when it is bracketed."""
        pts = sorted(points, key=lambda p: p.contrast)
        try:
            threshold = threshold_at(pts, target)
        except ThresholdNotBracketed:
            return cls(points=pts)
        return cls(points=pts, threshold_contrast=threshold, sensitivity=1.0 / threshold)


def threshold_at(points, target: float = TARGET_DPRIME) -> float:
    """Contrast where the curve first reaches ``target``, by linear interpolation.

    Scans upward in contrast for the first adjacent pair with
    d'_i < target <= d'_{i+1}.  Raises ThresholdNotBracketed (carrying the
    curve) when no such pair exists.
    """
    pts = [(float(p.contrast), float(p.dprime)) for p in points]
    contrasts = [c for c, _ in pts]
    if any(c2 <= c1 for c1, c2 in zip(contrasts, contrasts[1:])):
        raise ValueError("points must be sorted by strictly increasing contrast")
    for (c_lo, d_lo), (c_hi, d_hi) in zip(pts, pts[1:]):
        if d_lo < target <= d_hi:
            frac = (target - d_lo) / (d_hi - d_lo)
            return c_lo + frac * (c_hi - c_lo)
    raise ThresholdNotBracketed(f"threshold not bracketed at d'={target}", points)
