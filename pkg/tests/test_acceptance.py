"""Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line; the terminal summary repeats them.
"""
import math
import time

import numpy as np
import pytest

import _oracles as ref
from kcp import KernelSpec, Segmentation, build_gram, solve_all_d, theorem1_diagnostics, theorem2_v2
from kcp.metrics import (check_lemma1, check_prop1, d_inf_1, d_inf_2, d_inf_3, frobenius_direct,
                         frobenius_squared)
from kcp.oracle import check_approx_bounds, check_kolmogorov, coarse_bound_equality_case, run_battery, sample_max_partial_sums
from kcp.simulate import ExperimentConfig, run_experiment

FAMILY_SPECS = [KernelSpec("linear"), KernelSpec("polynomial", degree=3), KernelSpec("gaussian", bandwidth=0.7),
                KernelSpec("laplace", bandwidth=0.9), KernelSpec("chi_squared")]


def test_1_dp_matches_enumeration(criterion):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for i in range(200):
        spec = FAMILY_SPECS[i % len(FAMILY_SPECS)]
        n = int(rng.integers(2, 13))
        # the chi-squared kernel is defined on the probability simplex
        x = rng.dirichlet(np.ones(3), size=n) if spec.family == "chi_squared" else rng.normal(size=(n, 2))
        prof = solve_all_d(build_gram(spec, x), n)
        K = ref.gram(x.tolist(), ref.kernel_fn(spec.family, spec.degree, spec.bandwidth))
        for d in range(1, n + 1):
            want, _ = ref.brute_min_risk(K, d)
            err = abs(prof.risk(d) - want) / max(abs(want), 1e-300) if want != 0 else abs(prof.risk(d))
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 60
    criterion(1, ok, f"200 instances, worst relative risk error {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_2_reference_pair_losses(criterion):
    t1, t2 = [0, 8, 17, 19], [0, 7, 14, 19]
    got = (d_inf_1(t1, t2), d_inf_1(t2, t1), d_inf_2(t2, t1), d_inf_3(t1, t2), d_inf_2(t1, t2))
    ok = got == (3, 3, 3, 3, 2)
    criterion(2, ok, f"d1(t1,t2), d1(t2,t1), d2(t2,t1), d3, d2(t1,t2) = {got}")
    assert ok


def test_3_frobenius_closed_form(criterion):
    rng = np.random.default_rng(103)
    worst = 0.0
    sandwich_violations = 0
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        pair = []
        for _ in range(2):
            d = int(rng.integers(1, n + 1))
            cps = rng.choice(np.arange(1, n), size=d - 1, replace=False) if d > 1 else []
            pair.append(Segmentation.from_changepoints(cps, n))
        t1, t2 = pair
        closed = math.sqrt(max(frobenius_squared(t1, t2), 0.0))
        worst = max(worst, abs(closed - frobenius_direct(t1, t2)))
        fsq = frobenius_squared(t1, t2)
        d1, d2 = t1.n_segments, t2.n_segments
        sandwich_violations += not (abs(d1 - d2) - 1e-9 <= fsq <= d1 + d2 + 1e-9)
    ok = worst <= 1e-9 and sandwich_violations == 0
    criterion(3, ok, f"1000 pairs, max |closed - direct| {worst:.2e}, sandwich violations {sandwich_violations}")
    assert ok


def _perturbed_pair(rng):
    # change-points of t2 moved by at most a quarter of t1's shortest segment
    n = int(rng.integers(20, 301))
    d = int(rng.integers(2, 7))
    while True:
        cps = np.sort(rng.choice(np.arange(1, n), size=d - 1, replace=False))
        t1 = Segmentation.from_changepoints(cps, n)
        shift = int(t1.lengths.min()) // 4
        moved = cps + rng.integers(-shift, shift + 1, size=d - 1)
        if np.all(np.diff(moved) > 0) and moved[0] >= 1 and moved[-1] <= n - 1:
            return t1, Segmentation.from_changepoints(moved, n)


def test_4_lemma1_and_prop1_suites(criterion):
    rng = np.random.default_rng(104)
    start = time.perf_counter()
    counts = {"lemma1": 0, "prop1_upper": 0, "prop1_lower": 0}
    violations = {k: 0 for k in counts}
    while min(counts.values()) < 1000:
        t1, t2 = _perturbed_pair(rng)
        l1 = check_lemma1(t1, t2)
        if l1.condition_i or l1.condition_ii:
            counts["lemma1"] += 1
            violations["lemma1"] += not l1.passed
        p1 = check_prop1(t1, t2)
        if p1.upper_hypothesis:
            counts["prop1_upper"] += 1
            violations["prop1_upper"] += not (p1.frobenius_sq <= p1.upper_bound * (1 + 1e-12) + 1e-12)
        if p1.lower_hypothesis:
            counts["prop1_lower"] += 1
            violations["prop1_lower"] += not (p1.lower_bound <= p1.frobenius_sq * (1 + 1e-12) + 1e-12)
    elapsed = time.perf_counter() - start
    ok = sum(violations.values()) == 0
    criterion(4, ok, f"pairs {counts}, violations {violations}, {elapsed:.1f}s")
    assert ok


def test_5_inequality_battery(criterion):
    out = run_battery(instances=1000, seed=105)
    mu, tau = coarse_bound_equality_case(25, [0.0, 1.0], [2.0, -1.0])
    slack = check_approx_bounds(mu, tau)[0].slack
    bad = {k: v.violations for k, v in out.items() if v.violations}
    enough = all(v.instances >= 1000 for v in out.values())
    ok = not bad and enough and abs(slack) < 1e-10
    sizes = {k: v.instances for k, v in out.items()}
    criterion(5, ok, f"instances {sizes}, violations {bad or 0}, equality-case slack {slack:.1e}")
    assert ok


def test_6_kolmogorov_monte_carlo(criterion):
    start = time.perf_counter()
    samples = sample_max_partial_sums(100, 100_000, np.random.default_rng(106))
    reports = [check_kolmogorov(100, x, 100_000, samples=samples) for x in (15.0, 30.0, 60.0)]
    elapsed = time.perf_counter() - start
    ok = all(r.passed for r in reports) and elapsed < 60
    text = ", ".join(f"x={r.x:g}: upper {r.upper_confidence:.4f} <= {r.bound:.4f}" for r in reports)
    criterion(6, ok, f"{text}; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_7_consistency_slopes(criterion):
    slopes = {}
    means = {}
    for which in (1, 2, 3):
        cfg = ExperimentConfig(generator={"name": "piecewise_mean", "which": which, "sigma": 1.0},
                               n_grid=[100, 178, 316, 562, 1000], repetitions=100,
                               kernel=KernelSpec("gaussian", bandwidth=0.1),
                               selection={"mode": "auto_penalty", "d_max": 30}, master_seed=107,
                               regression_threshold=300)
        res = run_experiment(cfg)
        slopes[which] = res.slope
        means[which] = [round(float(m), 5) for m in res.mean]
    ok = all(s is not None and -1.3 <= s <= -0.7 for s in slopes.values())
    text = ", ".join(f"mu{w}: {s:.2f}" for w, s in slopes.items())
    criterion(7, ok, f"slopes over n >= 300 {text} (target [-1.3, -0.7]); mean losses {means}")
    assert ok


@pytest.mark.slow
def test_8_mode_change_separation(criterion):
    def run(kernel):
        cfg = ExperimentConfig(generator={"name": "modes_mixture", "delta": 0.999}, n_grid=[200, 400, 800],
                               repetitions=100, kernel=kernel,
                               selection={"mode": "fixed_d", "d": 3, "delta_n": "1/n"}, master_seed=108)
        return run_experiment(cfg)

    gauss = run(KernelSpec("gaussian", bandwidth=0.01))
    linear = run(KernelSpec("linear"))
    ratio = linear.mean[0] / gauss.mean[0]
    ok_a = -1.4 <= gauss.slope <= -0.6
    ok_b = linear.slope > -0.3 and ratio >= 3
    criterion(8, ok_a and ok_b, f"gaussian slope {gauss.slope:.2f} (target [-1.4, -0.6]); linear slope "
                                f"{linear.slope:.2f} (> -0.3); loss ratio at n=200 {ratio:.1f} (>= 3)")
    assert ok_a and ok_b


def test_9_rescaling_invariance(criterion):
    worst = 0.0
    for alpha in (0.1, 10.0):
        s = math.sqrt(alpha)
        for args in [(5, 0.1, 0.4, 1.0, 800, 1.5), (2, 0.3, 1.2, 2.0, 5000, 0.5), (10, 0.05, 0.2, 1.0, 300, 3.0)]:
            d, lam, delta, m2, n, y = args
            base = theorem1_diagnostics(d, lam, delta, m2, n, y)
            scaled = theorem1_diagnostics(d, lam, delta * s, m2 * alpha, n, y)
            worst = max(worst, *(abs(b - a) / abs(a) for a, b in zip(base, scaled)))
            v = theorem2_v2(d, delta, 1.1 * delta, m2, n, y, lam)
            vs = theorem2_v2(d, delta * s, 1.1 * delta * s, m2 * alpha, n, y, lam)
            worst = max(worst, abs(vs - v) / abs(v))
    ok = worst <= 1e-12
    criterion(9, ok, f"alpha in {{0.1, 10}}, worst relative change {worst:.1e}")
    assert ok
