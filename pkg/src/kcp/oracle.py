"""Numerical checks of the deterministic inequalities behind KCP's guarantees.

Everything here lives in the linear-kernel embedding: observations,
kernel means and noise are explicit vectors of R^d, so projections,
approximation errors and partial sums can be computed directly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .gram import Segmentation, as_segmentation
from .kernels import as_series
from .metrics import d_inf_1

# relative slack tolerated when comparing both sides of an inequality
RTOL = 1e-10


def _leq(lhs: float, rhs: float, rtol: float = RTOL) -> bool:
    return lhs <= rhs + rtol * max(abs(lhs), abs(rhs), 1.0)


def true_segmentation(values: np.ndarray) -> Segmentation:
    """Boundaries of the maximal runs of exactly equal rows."""
    change = np.any(values[1:] != values[:-1], axis=1)
    return Segmentation([0, *(np.flatnonzero(change) + 1).tolist(), len(values)])


@dataclass
class MeanSignal:
    """Piecewise-constant kernel means ``mu*_1 .. mu*_n`` in R^d."""

    values: np.ndarray
    true_tau: Segmentation = field(init=False)

    def __post_init__(self):
        self.values = as_series(self.values)
        self.true_tau = true_segmentation(self.values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_levels(cls, levels, boundaries) -> "MeanSignal":
        """Signal equal to ``levels[l]`` on segment ``l`` of `boundaries`."""
        tau = as_segmentation(boundaries)
        lv = as_series(levels)
        return cls(lv[tau.labels()])


@dataclass
class NoiseSample:
    """Centered noise ``eps_1 .. eps_n`` with per-index variances ``v_j = E|eps_j|^2``."""

    values: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.values = as_series(self.values)
        self.variances = np.broadcast_to(np.asarray(self.variances, dtype=float), (self.n,)).copy()

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def gaussian(cls, n: int, dim: int = 1, scale: float = 1.0, rng=None) -> "NoiseSample":
        rng = np.random.default_rng(rng)
        return cls(scale * rng.standard_normal((n, dim)), np.full(n, dim * scale**2))

    @classmethod
    def zeros(cls, n: int, dim: int = 1) -> "NoiseSample":
        return cls(np.zeros((n, dim)), np.zeros(n))


def project(tau: Segmentation, f: np.ndarray) -> np.ndarray:
    """Replace each row of `f` by the mean of its segment."""
    tau = as_segmentation(tau)
    f = as_series(f)
    sums = np.add.reduceat(f, tau.boundaries[:-1], axis=0)
    return np.repeat(sums / tau.lengths[:, None], tau.lengths, axis=0)


def _check_len(n: int, *others):
    for m in others:
        if m != n:
            raise ValueError(f"length mismatch: {n} vs {m}")


def jump_stats(mu: MeanSignal) -> tuple[float, float, float, float]:
    """``(smallest jump, largest jump, Lambda_min, Lambda_max)`` of ``mu``'s true segmentation."""
    tau = mu.true_tau
    if tau.n_segments < 2:
        raise ValueError("constant signal: no jumps")
    starts = np.asarray(tau.boundaries[:-1])
    levels = mu.values[starts]
    jumps = np.linalg.norm(np.diff(levels, axis=0), axis=1)
    return float(jumps.min()), float(jumps.max()), tau.lambda_min, tau.lambda_max


def approx_error(mu: MeanSignal, tau) -> float:
    """``A = ||mu* - Pi_tau mu*||^2``."""
    tau = as_segmentation(tau)
    _check_len(mu.n, tau.n)
    if tau.boundaries == mu.true_tau.boundaries:
        return 0.0
    r = mu.values - project(tau, mu.values)
    return float(np.sum(r * r))


@dataclass
class Decomposition:
    A: float
    L: float
    Q: float
    psi: float
    noise_sq: float
    direct: float
    identity_error: float

    def to_dict(self):
        return asdict(self)


def decomposition_terms(mu: MeanSignal, noise: NoiseSample, tau) -> Decomposition:
    """Terms of ``n R(tau) = ||Y - Pi Y||^2 = A + 2L - Q + ||eps||^2``.

    `identity_error` is the relative gap between the two sides, with the left
    side computed directly from ``Y = mu* + eps``.
    """
    tau = as_segmentation(tau)
    _check_len(mu.n, noise.n, tau.n)
    eps = noise.values
    resid = mu.values - project(tau, mu.values)
    A = float(np.sum(resid * resid))
    L = float(np.sum(resid * eps))
    pe = project(tau, eps)
    Q = float(np.sum(pe * pe))
    noise_sq = float(np.sum(eps * eps))
    y = mu.values + eps
    ry = y - project(tau, y)
    direct = float(np.sum(ry * ry))
    rhs = A + 2 * L - Q + noise_sq
    scale = max(abs(direct), A + abs(2 * L) + Q + noise_sq, 1e-300)
    return Decomposition(A, L, Q, 2 * L - Q + A, noise_sq, direct, abs(direct - rhs) / scale)


@dataclass
class BoundCheck:
    """One inequality ``lhs <= rhs`` evaluated on one instance."""

    name: str
    applicable: bool
    lhs: float
    rhs: float
    passed: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self):
        return {**asdict(self), "slack": self.slack}


def check_approx_bounds(mu: MeanSignal, tau) -> list[BoundCheck]:
    """Lower bounds on the normalized approximation error ``A/n``.

    * coarse bound, only for ``D_tau < D*``: ``A/n >= Lambda*_min Delta_min^2 / 2``
    * general bound: ``A/n >= min(Lambda*_min, d_inf_1(tau*, tau)/n) Delta_min^2 / 2``

    Each check stores the bound as ``lhs`` and ``A/n`` as ``rhs``. When
    ``tau`` has a single segment the inner minimum runs over an empty set,
    so the general bound falls back to ``Lambda*_min``.
    """
    tau = as_segmentation(tau)
    star = mu.true_tau
    dmin, _, lam_min, _ = jump_stats(mu)
    a_n = approx_error(mu, tau) / mu.n
    out = []
    coarse = 0.5 * lam_min * dmin**2
    ok = tau.n_segments < star.n_segments
    out.append(BoundCheck("approx_coarse", ok, coarse, a_n, _leq(coarse, a_n) if ok else True))
    if tau.n_segments >= 2:
        dist = d_inf_1(star, tau) / mu.n
    else:
        dist = np.inf
    general = 0.5 * min(lam_min, dist) * dmin**2
    out.append(BoundCheck("approx_general", True, general, a_n, _leq(general, a_n)))
    return out


def partial_sums(noise: NoiseSample) -> np.ndarray:
    return np.cumsum(noise.values, axis=0)


def max_partial_sum(noise: NoiseSample, check: bool = True) -> float:
    """``M_n = max_k ||eps_1 + ... + eps_k||``.

    With ``check=True`` also verifies, by scanning every ``a < b``, that
    half the largest block sum norm does not exceed ``M_n``.
    """
    s = partial_sums(noise)
    m = float(np.linalg.norm(s, axis=1).max())
    if check:
        lhs = 0.5 * max_block_sum(noise)
        if not _leq(lhs, m):
            raise AssertionError(f"block-sum bound violated: {lhs} > {m}")
    return m


def max_block_sum(noise: NoiseSample) -> float:
    """``max_{1 <= a < b <= n} ||eps_a + ... + eps_b||`` by exhaustive scan."""
    s = np.vstack([np.zeros(noise.values.shape[1]), partial_sums(noise)])
    n = noise.n
    if n < 2:
        return 0.0
    # block a..b (1-based) is s[b] - s[a-1]; a-1 ranges over 0..n-2, b over a+1..n
    i, j = np.triu_indices(n + 1, k=2)
    return float(np.linalg.norm(s[j] - s[i], axis=1).max())


def check_partial_sum_bound(noise: NoiseSample) -> BoundCheck:
    lhs = 0.5 * max_block_sum(noise)
    m = max_partial_sum(noise, check=False)
    return BoundCheck("partial_sum", True, lhs, m, _leq(lhs, m))


def check_lemma6(mu: MeanSignal, noise: NoiseSample, tau) -> list[BoundCheck]:
    """Deterministic controls of the noise terms by ``M_n``.

    ``|L| <= 6 D* max(D*, D_tau) Delta_max M_n`` and
    ``Q <= 4 D_tau M_n^2 / (n Lambda_min(tau))``.
    """
    tau = as_segmentation(tau)
    dec = decomposition_terms(mu, noise, tau)
    _, dmax, _, _ = jump_stats(mu)
    m = max_partial_sum(noise, check=False)
    d_star = mu.true_tau.n_segments
    lin = 6.0 * d_star * max(d_star, tau.n_segments) * dmax * m
    quad = 4.0 * tau.n_segments * m**2 / (mu.n * tau.lambda_min)
    return [
        BoundCheck("linear_term", True, abs(dec.L), lin, _leq(abs(dec.L), lin)),
        BoundCheck("quadratic_term", True, dec.Q, quad, _leq(dec.Q, quad)),
    ]


@dataclass
class KolmogorovReport:
    x: float
    trials: int
    exceed: int
    probability: float
    upper_confidence: float
    bound: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def clopper_pearson_upper(k: int, trials: int, level: float = 0.99) -> float:
    """One-sided upper confidence bound for a binomial proportion."""
    if k >= trials:
        return 1.0
    return float(stats.beta.ppf(level, k + 1, trials - k))


def sample_max_partial_sums(n: int, trials: int, rng=None, dim: int = 1, chunk: int = 5000) -> np.ndarray:
    """``M_n`` for `trials` independent standard normal noise sequences."""
    rng = np.random.default_rng(rng)
    out = np.empty(trials)
    for start in range(0, trials, chunk):
        m = min(chunk, trials - start)
        eps = rng.standard_normal((m, n, dim))
        s = np.cumsum(eps, axis=1)
        out[start:start + m] = np.linalg.norm(s, axis=2).max(axis=1)
    return out


def check_kolmogorov(n: int, x: float, trials: int, rng=None, dim: int = 1, level: float = 0.99,
                     samples: np.ndarray | None = None) -> KolmogorovReport:
    """Monte-Carlo check of ``P(M_n >= x) <= sum_j v_j / x^2`` for i.i.d. N(0, I_dim) noise.

    Pass precomputed `samples` of ``M_n`` to check several ``x`` on the same draws.
    """
    if samples is None:
        samples = sample_max_partial_sums(n, trials, rng, dim)
    trials = len(samples)
    k = int(np.count_nonzero(samples >= x))
    bound = n * dim / x**2
    upper = clopper_pearson_upper(k, trials, level)
    return KolmogorovReport(float(x), trials, k, k / trials, upper, bound, upper <= bound)


def random_mean_signal(rng, n: int, dim: int = 1, d_range=(2, 6), min_len: int = 2) -> MeanSignal:
    """Random piecewise-constant signal with ``D*`` uniform in `d_range` (inclusive)."""
    d = int(rng.integers(d_range[0], d_range[1] + 1))
    d = min(d, n // min_len)
    tau = random_segmentation(rng, n, d, min_len)
    while True:
        levels = rng.standard_normal((d, dim))
        if np.all(np.linalg.norm(np.diff(levels, axis=0), axis=1) > 1e-6):
            return MeanSignal.from_levels(levels, tau)


def random_segmentation(rng, n: int, d: int, min_len: int = 1) -> Segmentation:
    """Uniformly random segmentation of ``n`` points into ``d`` segments of length ``>= min_len``."""
    if d * min_len > n:
        raise ValueError("infeasible segmentation request")
    # stars and bars on the slack above the minimum lengths
    slack = n - d * min_len
    cuts = np.sort(rng.choice(slack + d - 1, size=d - 1, replace=False))
    extra = np.diff(np.concatenate([[-1], cuts, [slack + d - 1]])) - 1
    lengths = extra + min_len
    return Segmentation(np.concatenate([[0], np.cumsum(lengths)]))


def coarse_bound_equality_case(m: int, a, b) -> tuple[MeanSignal, Segmentation]:
    """Two halves of length `m` at levels `a` and `b`, and the one-segment candidate."""
    mu = MeanSignal.from_levels([np.atleast_1d(a), np.atleast_1d(b)], [0, m, 2 * m])
    return mu, Segmentation([0, 2 * m])


@dataclass
class CheckSummary:
    name: str
    instances: int
    violations: int
    worst_slack: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self):
        return {**asdict(self), "passed": self.passed}


def _summ(name: str, checks: list[BoundCheck]) -> CheckSummary:
    used = [c for c in checks if c.applicable]
    worst = min((c.slack for c in used), default=float("nan"))
    return CheckSummary(name, len(used), sum(not c.passed for c in used), worst)


def run_battery(instances: int = 1000, seed: int = 0, n_max: int = 60) -> dict[str, CheckSummary]:
    """Randomized verification of every deterministic inequality.

    Each check gets `instances` applicable random instances. Returns one
    summary per check plus the decomposition identity (``worst_slack`` is the
    negated worst relative identity error there).
    """
    rng = np.random.default_rng(seed)
    coarse, general, lin, quad, psum, ident = [], [], [], [], [], []
    worst_identity = 0.0
    identity_fail = 0
    while len(coarse) < instances:
        n = int(rng.integers(6, n_max + 1))
        dim = int(rng.integers(1, 4))
        mu = random_mean_signal(rng, n, dim)
        d_star = mu.true_tau.n_segments
        noise = NoiseSample.gaussian(n, dim, float(rng.uniform(0.1, 2.0)), rng)

        # coarse bound needs fewer segments than the truth
        d_small = int(rng.integers(1, d_star))
        coarse.append(check_approx_bounds(mu, random_segmentation(rng, n, d_small))[0])

        d_any = int(rng.integers(1, min(n, 10) + 1))
        tau = random_segmentation(rng, n, d_any)
        general.append(check_approx_bounds(mu, tau)[1])
        l6 = check_lemma6(mu, noise, tau)
        lin.append(l6[0])
        quad.append(l6[1])
        psum.append(check_partial_sum_bound(noise))
        dec = decomposition_terms(mu, noise, tau)
        worst_identity = max(worst_identity, dec.identity_error)
        identity_fail += dec.identity_error > 1e-9
        ident.append(dec)

    return {
        "approx_coarse": _summ("approx_coarse", coarse),
        "approx_general": _summ("approx_general", general),
        "partial_sum": _summ("partial_sum", psum),
        "linear_term": _summ("linear_term", lin),
        "quadratic_term": _summ("quadratic_term", quad),
        "decomposition": CheckSummary("decomposition", len(ident), int(identity_fail), -worst_identity),
    }
