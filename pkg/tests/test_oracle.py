import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import _oracles as ref
from kcp import Segmentation
from kcp.oracle import (MeanSignal, NoiseSample, approx_error, check_approx_bounds, check_kolmogorov,
                        check_lemma6, check_partial_sum_bound, clopper_pearson_upper, decomposition_terms, jump_stats,
                        max_block_sum, max_partial_sum, project, random_mean_signal, random_segmentation,
                        coarse_bound_equality_case, run_battery, sample_max_partial_sums)


def test_true_segmentation_from_runs():
    mu = MeanSignal([0, 0, 5, 5, 5, 1])
    assert mu.true_tau.to_list() == [0, 2, 5, 6]
    mu2 = MeanSignal.from_levels([[0, 1], [0, 2]], [0, 3, 4])
    assert mu2.true_tau.to_list() == [0, 3, 4]


def test_jump_stats_examples():
    assert jump_stats(MeanSignal([0, 0, 5, 5])) == (5.0, 5.0, 0.5, 0.5)
    dmin, dmax, lmin, lmax = jump_stats(MeanSignal([0, 0, 0, 1, 1, 3]))
    assert (dmin, dmax) == (1.0, 2.0)
    assert lmin == pytest.approx(1 / 6) and lmax == pytest.approx(1 / 2)
    with pytest.raises(ValueError):
        jump_stats(MeanSignal([2, 2, 2]))


def test_projection_matches_segment_means():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(9, 2))
    tau = Segmentation([0, 4, 5, 9])
    np.testing.assert_allclose(project(tau, f), ref.segment_means(f.tolist(), tau.to_list()), rtol=1e-13)


def test_approx_error_cases():
    rng = np.random.default_rng(1)
    mu = random_mean_signal(rng, 30, 2)
    assert approx_error(mu, mu.true_tau) == 0.0
    finer = mu.true_tau.refine(next(c for c in range(1, 30) if c not in mu.true_tau.boundaries))
    assert approx_error(mu, finer) == pytest.approx(0.0, abs=1e-24)
    # equal halves, one segment: A/n = |a-b|^2/4
    mu, tau = coarse_bound_equality_case(7, [1.0, 2.0], [4.0, -2.0])
    assert approx_error(mu, tau) / mu.n == pytest.approx(25 / 4, rel=1e-14)


def test_decomposition_special_cases():
    rng = np.random.default_rng(2)
    mu = random_mean_signal(rng, 25, 1)
    tau = random_segmentation(rng, 25, 4)
    dec = decomposition_terms(mu, NoiseSample.zeros(25), tau)
    assert dec.L == 0.0 and dec.Q == 0.0 and dec.psi == dec.A
    noise = NoiseSample.gaussian(25, 1, 1.0, rng)
    at_truth = decomposition_terms(mu, noise, mu.true_tau)
    assert at_truth.A == 0.0 and at_truth.L == pytest.approx(0.0, abs=1e-14)
    assert at_truth.psi <= 0.0


def test_decomposition_identity_against_direct_projection():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(4, 40))
        mu = random_mean_signal(rng, n, int(rng.integers(1, 4)))
        noise = NoiseSample.gaussian(n, mu.values.shape[1], 1.5, rng)
        tau = random_segmentation(rng, n, int(rng.integers(1, min(n, 8) + 1)))
        dec = decomposition_terms(mu, noise, tau)
        y = (mu.values + noise.values).tolist()
        fit = ref.segment_means(y, tau.to_list())
        direct = sum((a - b) ** 2 for ra, rb in zip(y, fit) for a, b in zip(ra, rb))
        assert dec.A + 2 * dec.L - dec.Q + (noise.values**2).sum() == pytest.approx(direct, rel=1e-9)
        assert dec.identity_error <= 1e-9


def test_partial_sums_examples():
    assert max_partial_sum(NoiseSample([1, -1, 1, -1], 1.0)) == 1.0
    assert max_partial_sum(NoiseSample([1, 1, 1], 1.0)) == 3.0
    assert max_block_sum(NoiseSample([1, -1, 1, -1], 1.0)) == 1.0
    assert max_block_sum(NoiseSample([-1, 3, 3, -5], 1.0)) == 6.0


def test_block_sum_scan_matches_loops():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = int(rng.integers(2, 25))
        e = rng.normal(size=(n, 2))
        want = max(np.linalg.norm(e[a:b + 1].sum(axis=0)) for a in range(n) for b in range(a + 1, n))
        assert max_block_sum(NoiseSample(e, 2.0)) == pytest.approx(want, rel=1e-12)
        assert check_partial_sum_bound(NoiseSample(e, 2.0)).passed


def test_coarse_bound_equality_case_is_tight():
    for m, a, b in [(5, 0.0, 1.0), (50, [1.0, -3.0], [2.5, 0.0]), (13, 7.0, -2.0)]:
        mu, tau = coarse_bound_equality_case(m, a, b)
        coarse = check_approx_bounds(mu, tau)[0]
        assert coarse.applicable and coarse.passed
        assert abs(coarse.slack) < 1e-10


def test_lemma6_zero_noise_and_truth():
    rng = np.random.default_rng(5)
    mu = random_mean_signal(rng, 20, 1)
    tau = random_segmentation(rng, 20, 3)
    lin, quad = check_lemma6(mu, NoiseSample.zeros(20), tau)
    assert lin.lhs == 0.0 and lin.rhs == 0.0 and lin.passed
    assert quad.lhs == 0.0 and quad.passed
    lin, _ = check_lemma6(mu, NoiseSample.gaussian(20, 1, 1.0, rng), mu.true_tau)
    assert lin.lhs == pytest.approx(0.0, abs=1e-12) and lin.passed


def test_general_bound_at_truth_is_trivial():
    mu = MeanSignal([0, 0, 3, 3, 3, -1])
    general = check_approx_bounds(mu, mu.true_tau)[1]
    assert general.lhs == 0.0 and general.rhs == 0.0 and general.passed


def test_clopper_pearson():
    assert clopper_pearson_upper(0, 100, 0.99) == pytest.approx(1 - 0.01 ** (1 / 100), rel=1e-10)
    assert clopper_pearson_upper(100, 100) == 1.0
    assert 0.3 < clopper_pearson_upper(30, 100) < 0.45


def test_kolmogorov_small_examples():
    rng = np.random.default_rng(6)
    samples = sample_max_partial_sums(100, 10_000, rng)
    # zero exceedances cannot certify a bound far below the resolution of 10^4 trials
    huge = check_kolmogorov(100, 1e6, 10_000, samples=samples)
    assert huge.exceed == 0 and huge.upper_confidence > huge.bound and not huge.passed
    tiny = check_kolmogorov(100, 1e-3, 10_000, samples=samples)
    assert tiny.probability == 1.0 and tiny.bound > 1 and tiny.passed
    mid = check_kolmogorov(100, 30.0, 10_000, samples=samples)
    assert mid.bound == pytest.approx(100 / 900) and mid.passed


def test_noise_sample_moments():
    rng = np.random.default_rng(7)
    e = NoiseSample.gaussian(100_000, 2, 1.0, rng)
    se = 1 / np.sqrt(100_000)
    assert np.all(np.abs(e.values.mean(axis=0)) < 3 * se)
    assert np.all(e.variances == 2.0)


def test_random_generators_respect_constraints():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = int(rng.integers(6, 60))
        mu = random_mean_signal(rng, n, 2)
        assert 2 <= mu.true_tau.n_segments <= 6
        assert mu.true_tau.lengths.min() >= 2
        assert jump_stats(mu)[0] > 1e-6
        d = int(rng.integers(1, n + 1))
        assert random_segmentation(rng, n, d).n_segments == d


def test_battery_small_run():
    out = run_battery(instances=100, seed=3, n_max=30)
    assert set(out) == {"approx_coarse", "approx_general", "partial_sum", "linear_term", "quadratic_term",
                        "decomposition"}
    for summary in out.values():
        assert summary.instances >= 100 and summary.violations == 0


@settings(max_examples=150, deadline=None)
@given(st.integers(6, 40), st.integers(0, 2**32 - 1))
def test_property_approx_error_nonincreasing_under_refinement(n, seed):
    rng = np.random.default_rng(seed)
    mu = random_mean_signal(rng, n, 2)
    tau = random_segmentation(rng, n, int(rng.integers(1, n)))
    free = [c for c in range(1, n) if c not in tau.boundaries]
    finer = tau.refine(int(rng.choice(free)))
    assert approx_error(mu, finer) <= approx_error(mu, tau) * (1 + 1e-12) + 1e-12
    for check in check_approx_bounds(mu, tau):
        assert check.passed
