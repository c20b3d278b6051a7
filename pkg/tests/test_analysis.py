"""Distance statistics, calibration, collision and committee math."""
import math

import numpy as np
import pytest

from proxima import analysis, digest


def test_expected_sq_distance_closed_form():
    # E||sum of k uniform vectors||^2 = 8k/12 + 8k(k-1)/4 + ... = 2k/3 + 2k^2
    assert math.isclose(analysis.expected_sq_distance(1), 8 / 3)
    assert math.isclose(analysis.expected_sq_distance(2), 28 / 3)
    assert math.isclose(analysis.expected_sq_distance(3), 20.0)


def test_distance_bounds_two_decimals():
    assert round(analysis.distance_bound(1), 2) == 1.63
    assert round(analysis.distance_bound(2), 2) == 3.06
    assert round(analysis.distance_bound(3), 2) == 4.47


def test_monte_carlo_moments_match_closed_form():
    rows = analysis.monte_carlo_distance_moments([1, 2, 3], trials=50_000, seed=0)
    want_mean = {1: 1.611, 2: 3.028, 3: 4.443}
    for k, mean, mean_sq in rows:
        assert abs(mean_sq - analysis.expected_sq_distance(k)) / analysis.expected_sq_distance(k) < 0.02
        assert abs(mean - want_mean[k]) / want_mean[k] < 0.02


def test_sample_missing_distances_bounded_by_k():
    rng = np.random.default_rng(1)
    d = analysis.sample_missing_distances(5000, 2, rng)
    assert d.shape == (5000,)
    assert d.max() <= math.sqrt(8) * 2 + 1e-9  # k=2 hard cap: 2 * sqrt(8)
    assert d.min() >= 0


def test_calibrate_lands_in_band_across_seeds():
    ts = [analysis.calibrate(seed=s).threshold for s in range(20)]
    assert all(4.6 <= t <= 5.2 for t in ts), ts
    mean = sum(ts) / len(ts)
    assert 4.75 <= mean <= 5.05, mean


def test_calibrate_literal_99th_percentile_lands_low():
    # the 99th-percentile variant of the recipe settles near 4.59, below the
    # operating band; the shipped default therefore uses the 99.9th
    ts = [analysis.calibrate(percentile=99.0, seed=s).threshold for s in range(10)]
    mean = sum(ts) / len(ts)
    assert mean < 4.65, mean


def test_calibrate_margin_scales_linearly():
    a = analysis.calibrate(margin=1.0, seed=3)
    b = analysis.calibrate(margin=1.2, seed=3)
    assert math.isclose(b.threshold, a.threshold * 1.2, rel_tol=1e-12)
    assert math.isclose(a.threshold, a.percentile_value)


def test_calibrate_validation():
    with pytest.raises(ValueError):
        analysis.calibrate(samples=0)
    with pytest.raises(ValueError):
        analysis.calibrate(percentile=101)


def test_liveness_bound_values():
    # exp(-2N (1/3 - 0.00185)^2): < 1e-9 at N=100, < 1e-95 at N=1000
    at100 = analysis.liveness_failure_bound(100)
    at1000 = analysis.liveness_failure_bound(1000)
    assert at100 < 1e-9
    assert at1000 < 1e-95
    assert math.isclose(at100, math.exp(-200 * (1 / 3 - 0.00185) ** 2), rel_tol=1e-9)


def test_liveness_bound_rejects_large_p():
    with pytest.raises(ValueError):
        analysis.liveness_failure_bound(100, p_excluded=0.4)


def test_collision_probability_analytic():
    # ball-to-cube volume ratio at (tau=4.9, side=14): (pi^4/24) * (4.9/14)^8
    p = analysis.collision_probability(4.9, 14.0)
    assert math.isclose(p, (math.pi ** 4 / 24) * (4.9 / 14) ** 8, rel_tol=1e-12)
    assert 9.0e-4 < p < 9.3e-4
    assert analysis.collision_probability(100, 14) == 1.0


def test_empirical_collision_rate_in_band():
    rate = analysis.empirical_collision_rate(trials=200_000, seed=0)
    assert 1e-4 <= rate <= 1e-2, rate


def test_committee_failure_prob_brute_force():
    # exact tail vs direct enumeration at G=10
    from itertools import product
    p = 0.3
    brute = 0.0
    for byz in range(4, 11):
        brute += math.comb(10, byz) * p ** byz * (1 - p) ** (10 - byz)
    assert math.isclose(analysis.committee_failure_prob(10, 0.3), brute, rel_tol=1e-12)
    assert round(analysis.committee_failure_prob(10, 0.3), 6) == 0.350389
    assert abs(analysis.committee_failure_prob(128, 0.3) - 0.2131) < 5e-4


def test_fast_path_probability():
    assert math.isclose(analysis.fast_path_probability(0.05, 10), 0.95 ** 10)
    assert math.isclose(analysis.fast_path_probability(0.01, 10), 0.99 ** 10)
    assert analysis.fast_path_probability(0.0, 5) == 1.0


def test_adversarial_search_trivial_at_operating_threshold():
    # a candidate same-size set digest already lands within 4.9 of the target
    # about half the time, so the search ends almost immediately
    rng = np.random.default_rng(99)
    target = digest.digest_of([rng.bytes(32) for _ in range(20)])
    trials = [analysis.adversarial_search(target, 4.9, 20, 10_000, seed=s).trials
              for s in range(15)]
    assert 1 <= float(np.median(trials)) <= 10, trials


def test_adversarial_search_hard_at_one_missing_radius():
    rng = np.random.default_rng(99)
    target = digest.digest_of([rng.bytes(32) for _ in range(20)])
    results = [analysis.adversarial_search(target, 1.61, 20, 200_000, seed=s)
               for s in range(10)]
    med = float(np.median([r.trials for r in results]))
    assert 1e2 <= med <= 1e5, med
    hit = next(r for r in results if r.found)
    assert len(hit.payloads) == 20
    assert digest.distance(digest.digest_of(hit.payloads), target) <= 1.61


def test_adversarial_search_validation():
    target = digest.digest_of([b"x"])
    with pytest.raises(ValueError):
        analysis.adversarial_search(target, 4.9, 0, 10)
    res = analysis.adversarial_search(target, 1e-12, 2, 50, seed=1)
    assert not res.found and res.payloads is None and res.trials == 50
