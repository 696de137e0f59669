import math

import numpy as np
import pytest

from contrastbench.metrics import (ConfusionCounts, SweepCurve, SweepPoint,
                                   ThresholdNotBracketed, analytic_d_prime,
                                   corrected_rates, d_prime,
                                   inverse_normal_cdf, threshold_at)

from oracles import (analytic_d_prime_ref, d_prime_ref, inverse_normal_bisect,
                     normal_cdf)


def test_confusion_counts_validation_and_totals():
    c = ConfusionCounts(3, 1, 2, 4)
    assert c.n_signal == 4 and c.n_noise == 6
    assert (c + c).hits == 6
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)
    with pytest.raises(ValueError):
        ConfusionCounts(0.5, 0, 0, 0)


def test_corrected_rates_examples():
    assert corrected_rates(ConfusionCounts(100, 0, 0, 1))[0] == pytest.approx(100.5 / 101)
    assert corrected_rates(ConfusionCounts(50, 50, 0, 1))[0] == pytest.approx(0.5)
    assert corrected_rates(ConfusionCounts(0, 100, 0, 1))[0] == pytest.approx(0.5 / 101)


def test_corrected_rates_need_both_classes():
    with pytest.raises(ValueError):
        corrected_rates(ConfusionCounts(5, 5, 0, 0))
    with pytest.raises(ValueError):
        corrected_rates(ConfusionCounts(0, 0, 5, 5))


def test_inverse_normal_cdf_against_bisection_oracle():
    ps = np.concatenate([
        np.linspace(1e-6, 0.02, 40),
        np.linspace(0.02, 0.98, 120),
        np.linspace(0.98, 1 - 1e-6, 40),
    ])
    for p in ps:
        assert inverse_normal_cdf(float(p)) == pytest.approx(
            inverse_normal_bisect(float(p)), abs=1e-9)


def test_inverse_normal_cdf_round_trip_and_domain():
    for z in (-5.0, -1.2, 0.0, 0.5, 3.7):
        assert inverse_normal_cdf(normal_cdf(z)) == pytest.approx(z, abs=1e-9)
    for p in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(ValueError):
            inverse_normal_cdf(p)


def test_d_prime_zero_at_equal_rates():
    assert d_prime(ConfusionCounts(50, 50, 50, 50)) == pytest.approx(0.0, abs=1e-12)


def test_d_prime_examples_against_frozen_oracle_values():
    # 99/1 vs 1/99 at 100 trials per class: 2*Z(0.985149...)
    assert d_prime(ConfusionCounts(99, 1, 1, 99)) == pytest.approx(4.34805765539, abs=1e-9)
    # perfect 100/0 and 0/100 stays finite: 2*Z(100.5/101)
    assert d_prime(ConfusionCounts(100, 0, 0, 100)) == pytest.approx(5.15853627089, abs=1e-9)


def test_d_prime_antisymmetric_under_class_swap():
    c = ConfusionCounts(80, 20, 30, 70)
    swapped = ConfusionCounts(30, 70, 80, 20)
    assert d_prime(swapped) == pytest.approx(-d_prime(c), abs=1e-12)


def test_d_prime_doubling_counts_small_bias():
    base = d_prime(ConfusionCounts(80, 20, 30, 70))
    doubled = d_prime(ConfusionCounts(160, 40, 60, 140))
    assert abs(doubled - base) <= 0.02


def test_d_prime_grid_against_oracle():
    rng = np.random.default_rng(12345)
    for _ in range(1000):
        n_sig, n_noise = rng.integers(1, 500, size=2)
        hits = int(rng.integers(0, n_sig + 1))
        fas = int(rng.integers(0, n_noise + 1))
        counts = ConfusionCounts(hits, int(n_sig) - hits, fas, int(n_noise) - fas)
        assert d_prime(counts) == pytest.approx(
            d_prime_ref(hits, int(n_sig) - hits, fas, int(n_noise) - fas), abs=1e-6)


def test_analytic_d_prime_identical_maps():
    lam = np.full(64, 300.0)
    assert analytic_d_prime(lam, lam) == 0.0
    assert analytic_d_prime(np.zeros(10), np.zeros(10)) == 0.0


def test_analytic_d_prime_single_pixel_example():
    # alpha=300, beta=330: numerator 30*ln(1.1), denominator sqrt(0.5*630*ln^2(1.1))
    value = analytic_d_prime([300.0], [330.0])
    assert value == pytest.approx(1.69030850946, abs=1e-9)
    num = 30 * math.log(1.1)
    den = math.sqrt(0.5 * 630 * math.log(1.1) ** 2)
    assert value == pytest.approx(num / den, rel=1e-12)


def test_analytic_d_prime_matches_fsum_reference():
    rng = np.random.default_rng(7)
    alpha = rng.uniform(5, 500, size=200)
    beta = alpha * rng.uniform(0.8, 1.2, size=200)
    beta[::5] = alpha[::5]  # identical pixels contribute nothing
    assert analytic_d_prime(alpha, beta) == pytest.approx(
        analytic_d_prime_ref(alpha, beta), rel=1e-10)


def test_analytic_d_prime_permutation_invariant():
    rng = np.random.default_rng(8)
    alpha = rng.uniform(100, 400, size=128)
    beta = alpha * rng.uniform(0.9, 1.1, size=128)
    perm = rng.permutation(128)
    assert analytic_d_prime(alpha[perm], beta[perm]) == pytest.approx(
        analytic_d_prime(alpha, beta), rel=1e-12)


def test_analytic_d_prime_monotone_in_signal_scale():
    rng = np.random.default_rng(9)
    alpha = np.full(64, 300.0)
    delta = rng.uniform(0.0, 30.0, size=64)
    values = [analytic_d_prime(alpha, alpha + s * delta)
              for s in np.logspace(-2, 1, 12)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_analytic_d_prime_validates_inputs():
    with pytest.raises(ValueError):
        analytic_d_prime([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        analytic_d_prime([-1.0], [1.0])


def test_analytic_d_prime_handles_one_sided_zero_rates():
    value = analytic_d_prime([0.0], [10.0])
    assert math.isfinite(value) and value > 0


def test_threshold_interpolation_examples():
    pts = [SweepPoint(0.001, 1.0), SweepPoint(0.002, 2.0)]
    assert threshold_at(pts, 1.5) == pytest.approx(0.0015, rel=1e-12)
    # target exactly at a measured point returns that contrast
    pts = [SweepPoint(0.001, 1.0), SweepPoint(0.002, 1.5), SweepPoint(0.004, 3.0)]
    assert threshold_at(pts, 1.5) == 0.002


def test_threshold_first_upward_bracket_wins():
    pts = [SweepPoint(0.001, 1.0), SweepPoint(0.002, 2.0),
           SweepPoint(0.004, 1.2), SweepPoint(0.008, 2.5)]
    assert threshold_at(pts, 1.5) == pytest.approx(0.0015, rel=1e-12)


def test_threshold_not_bracketed_carries_points():
    pts = [SweepPoint(0.001, 0.2), SweepPoint(0.002, 0.6)]
    with pytest.raises(ThresholdNotBracketed, match="threshold not bracketed") as err:
        threshold_at(pts, 1.5)
    assert err.value.points == pts


def test_threshold_requires_sorted_contrasts():
    with pytest.raises(ValueError):
        threshold_at([SweepPoint(0.002, 1.0), SweepPoint(0.001, 2.0)], 1.5)


def test_sweep_curve_pairing_and_ordering():
    pts = [SweepPoint(0.001, 1.0), SweepPoint(0.002, 2.0)]
    curve = SweepCurve.from_points(pts)
    assert curve.threshold_contrast == pytest.approx(0.0015, rel=1e-12)
    assert curve.sensitivity == pytest.approx(1 / curve.threshold_contrast, rel=1e-15)
    flat = SweepCurve.from_points([SweepPoint(0.001, 0.1)])
    assert flat.threshold_contrast is None and flat.sensitivity is None
    with pytest.raises(ValueError):
        SweepCurve([SweepPoint(0.002, 1.0), SweepPoint(0.001, 2.0)])
    with pytest.raises(ValueError):
        SweepCurve(pts, threshold_contrast=0.0015, sensitivity=None)
