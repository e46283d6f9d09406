"""Seeded generators and the consistency experiment runner.

Two data families are provided:

* ``piecewise_mean``: ``X_i = mu(i/n) + sigma * g_i`` for one of three fixed
  piecewise-constant mean functions (4, 4 and 9 jumps on ``[0, 1]``);
* ``modes_mixture``: standard normal outer thirds and a symmetric two-mode
  Gaussian mixture with the same mean and variance in the middle third.

``run_experiment`` repeats detection over a grid of sample sizes and
records the normalized Hausdorff loss ``d_H2(tau*, tau_hat) / n``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from .gram import Segmentation, build_gram
from .kernels import KernelSpec
from .metrics import d_inf_2
from .segmenter import (DEFAULT_D_MAX, PenaltySpec, calibrate_c, default_c_grid,
                        select_penalized, solve_all_d, solve_fixed_d)


SELECTION_MODES = ("auto_penalty", "fixed_d", "penalty")


class ExperimentError(RuntimeError):
    """A replication failed; `seed` identifies it."""

    def __init__(self, message: str, n: int, rep: int, seed: tuple[int, int, int]):
        super().__init__(f"{message} (n={n}, rep={rep}, seed={list(seed)})")
        self.n, self.rep, self.seed = n, rep, seed


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on ``[0, 1]``; ``breaks`` are the jump locations."""

    breaks: tuple[Fraction, ...]
    levels: tuple[float, ...]

    def changepoints(self, n: int) -> list[int]:
        return [math.floor(n * b) for b in self.breaks]

    def segmentation(self, n: int) -> Segmentation:
        cps = self.changepoints(n)
        if len(set(cps)) != len(cps) or cps[0] < 1 or cps[-1] >= n:
            raise ValueError(f"n={n} is too small to separate the {len(cps)} change-points")
        return Segmentation([0, *cps, n])

    def sample_means(self, n: int) -> np.ndarray:
        """``mu(i/n)`` for ``i = 1..n``, with ``i`` in segment ``l`` iff ``tau_{l-1} < i <= tau_l``."""
        tau = self.segmentation(n)
        return np.asarray(self.levels)[tau.labels()]


def _step(breaks: Sequence[str], levels: Sequence[float]) -> StepFunction:
    return StepFunction(tuple(Fraction(b) for b in breaks), tuple(float(v) for v in levels))


# Stand-ins for the three regression functions: 4, 4 and 9 jumps, levels in [-2, 3],
# the third with segments of very different lengths. Jumps are at least 3 so that
# a Gaussian kernel of bandwidth 0.1 is close to saturation at every jump.
MEAN_FUNCTIONS = {
    1: _step(["0.2", "0.4", "0.6", "0.8"], [-2.0, 2.0, -2.0, 3.0, -1.0]),
    2: _step(["0.18", "0.4", "0.62", "0.82"], [3.0, -1.0, 3.0, -2.0, 2.0]),
    3: _step(["0.07", "0.17", "0.3", "0.38", "0.5", "0.62", "0.7", "0.82", "0.92"],
             [-2.0, 3.0, -2.0, 2.0, -2.0, 3.0, -1.0, 3.0, -2.0, 2.0]),
}


def gen_piecewise_mean(which: int, n: int, seed=None, sigma: float = 1.0) -> tuple[np.ndarray, Segmentation]:
    """Noisy samples of mean function `which` at ``i/n``, and the true segmentation."""
    if which not in MEAN_FUNCTIONS:
        raise ValueError(f"which must be 1, 2 or 3, got {which}")
    if n < 20:
        raise ValueError("piecewise_mean needs n >= 20")
    f = MEAN_FUNCTIONS[which]
    tau = f.segmentation(n)
    rng = np.random.default_rng(seed)
    x = f.sample_means(n) + sigma * rng.standard_normal(n)
    return x, tau


def gen_modes_mixture(n: int, delta: float = 0.999, seed=None) -> tuple[np.ndarray, Segmentation]:
    """Outer thirds N(0, 1); middle third the mixture ``N(+-delta, 1 - delta^2)`` with equal weights."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if n < 9:
        raise ValueError("modes_mixture needs n >= 9")
    t1, t2 = n // 3, (2 * n) // 3
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    m = t2 - t1
    signs = rng.choice([-1.0, 1.0], size=m)
    x[t1:t2] = delta * signs + math.sqrt(1 - delta**2) * rng.standard_normal(m)
    return x, Segmentation([0, t1, t2, n])


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one consistency experiment.

    `generator` is ``{"name": "piecewise_mean", "which": 1|2|3, "sigma": s}``
    or ``{"name": "modes_mixture", "delta": d}``; `selection` is
    ``{"mode": "auto_penalty", "c_grid": [...]?, "d_max": 30?}`` or
    ``{"mode": "fixed_d", "d": 3, "delta_n": 0.0 | "1/n"}`` or
    ``{"mode": "penalty", "c": C, "d_max": 30?}`` for a fixed constant.
    """

    generator: dict[str, Any]
    n_grid: list[int]
    repetitions: int
    kernel: KernelSpec
    selection: dict[str, Any]
    master_seed: int = 0
    regression_threshold: int | None = None

    def __post_init__(self):
        self.n_grid = [int(v) for v in self.n_grid]
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.generator.get("name") not in ("piecewise_mean", "modes_mixture"):
            raise ValueError(f"unknown generator {self.generator.get('name')!r}")
        if self.selection.get("mode") not in SELECTION_MODES:
            raise ValueError(f"unknown selection mode {self.selection.get('mode')!r}")
        need = {"fixed_d": "d", "penalty": "c"}.get(self.selection["mode"])
        if need and need not in self.selection:
            raise ValueError(f"selection mode {self.selection['mode']!r} needs {need!r}")
        if self.regression_threshold is None:
            self.regression_threshold = self.n_grid[0]
        if not self.n_grid[0] <= self.regression_threshold <= self.n_grid[-1]:
            raise ValueError("regression_threshold must lie within the n_grid range")

    def to_dict(self) -> dict:
        return {
            "generator": dict(self.generator),
            "n_grid": list(self.n_grid),
            "repetitions": self.repetitions,
            "kernel": self.kernel.to_dict(),
            "selection": dict(self.selection),
            "master_seed": self.master_seed,
            "regression_threshold": self.regression_threshold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        data["kernel"] = KernelSpec.from_dict(data["kernel"])
        return cls(**data)


def replication_seed(master_seed: int, n: int, rep: int) -> np.random.SeedSequence:
    """Seed of one replication, independent of the rest of the grid."""
    return np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(n), int(rep)])


def generate(generator: dict, n: int, seed) -> tuple[np.ndarray, Segmentation]:
    if generator["name"] == "piecewise_mean":
        return gen_piecewise_mean(int(generator["which"]), n, seed, float(generator.get("sigma", 1.0)))
    return gen_modes_mixture(n, float(generator.get("delta", 0.999)), seed)


def _delta_n(value, n: int) -> float:
    if isinstance(value, str):
        num, _, den = value.partition("/")
        if den.strip() != "n":
            raise ValueError(f"delta_n must be a number or 'k/n', got {value!r}")
        return float(num) / n
    return float(value)


def hausdorff_loss(star: Segmentation, est: Segmentation) -> int:
    """``d_H2(star, est)``, taking a direction with no inner change-points as 0."""
    parts = []
    if star.n_segments > 1:
        parts.append(d_inf_2(star, est))
    if est.n_segments > 1:
        parts.append(d_inf_2(est, star))
    return max(parts, default=0)


def detect(x: np.ndarray, kernel: KernelSpec, selection: dict) -> Segmentation:
    """Run the configured selection rule on one series."""
    n = len(x)
    gram = build_gram(kernel, x)
    if selection["mode"] == "fixed_d":
        return solve_fixed_d(gram, int(selection["d"]), _delta_n(selection.get("delta_n", 0.0), n))
    d_max = min(int(selection.get("d_max", DEFAULT_D_MAX)), n)
    profile = solve_all_d(gram, d_max, int(selection.get("min_seg_len", 1)))
    m2 = gram.max_diag
    if selection["mode"] == "penalty":
        c = float(selection["c"])
    else:
        grid = selection.get("c_grid")
        grid = default_c_grid() if grid is None else np.asarray(grid, dtype=float)
        c = calibrate_c(profile, m2, n, grid)
    return select_penalized(profile, PenaltySpec(c, m2), n)


@dataclass
class ExperimentResult:
    """Per-replication losses and their per-``n`` summaries."""

    config: ExperimentConfig
    n_grid: list[int]
    losses: np.ndarray  # shape (len(n_grid), repetitions), normalized by n
    d_hat: np.ndarray   # same shape, selected number of segments
    slope: float | None = field(default=None)
    intercept: float | None = field(default=None)

    @property
    def mean(self) -> np.ndarray:
        return self.losses.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        if self.losses.shape[1] < 2:
            return np.zeros(len(self.n_grid))
        return self.losses.std(axis=1, ddof=1)

    @property
    def stderr(self) -> np.ndarray:
        return self.std / math.sqrt(self.losses.shape[1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "rep", "loss", "d_hat"])
        for i, n in enumerate(self.n_grid):
            for r in range(self.losses.shape[1]):
                w.writerow([n, r, repr(float(self.losses[i, r])), int(self.d_hat[i, r])])
        return buf.getvalue()

    def summary(self) -> dict:
        out = {
            "config": self.config.to_dict(),
            "per_n": [
                {"n": int(n), "mean": float(m), "std": float(s), "stderr": float(e),
                 "mean_d_hat": float(d)}
                for n, m, s, e, d in zip(self.n_grid, self.mean, self.std, self.stderr,
                                         self.d_hat.mean(axis=1))
            ],
            "regression": None,
        }
        if self.slope is not None:
            out["regression"] = {"threshold": self.config.regression_threshold,
                                 "slope": self.slope, "intercept": self.intercept}
        return out

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KCP_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Run every replication of `config` and fit the log-log slope when possible.

    Replications are independent and may run on several threads (default:
    ``KCP_THREADS``); results do not depend on the thread count.
    """
    reps = config.repetitions
    losses = np.empty((len(config.n_grid), reps))
    d_hat = np.empty((len(config.n_grid), reps), dtype=np.int64)

    def one(job):
        i, n, r = job
        seed = replication_seed(config.master_seed, n, r)
        try:
            x, star = generate(config.generator, n, seed)
            est = detect(x, config.kernel.resolve(x), config.selection)
        except Exception as exc:
            raise ExperimentError(str(exc), n, r, (config.master_seed, n, r)) from exc
        losses[i, r] = hausdorff_loss(star, est) / n
        d_hat[i, r] = est.n_segments

    jobs = [(i, n, r) for i, n in enumerate(config.n_grid) for r in range(reps)]
    workers = threads or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(one, jobs))
    else:
        for job in jobs:
            one(job)

    result = ExperimentResult(config, list(config.n_grid), losses, d_hat)
    try:
        result.slope, result.intercept = slope_regression(result, config.regression_threshold)
    except ValueError:
        pass
    return result


def slope_regression(result: ExperimentResult | tuple[Sequence[int], Sequence[float]],
                     threshold: int) -> tuple[float, float]:
    """Least-squares fit of ``log(mean loss)`` on ``log(n)`` over ``n >= threshold``.

    `result` may also be a pair ``(n_values, mean_losses)``.
    """
    if isinstance(result, ExperimentResult):
        ns, means = np.asarray(result.n_grid, dtype=float), result.mean
    else:
        ns, means = (np.asarray(v, dtype=float) for v in result)
    keep = ns >= threshold
    if keep.sum() < 2:
        raise ValueError(f"need at least two grid points with n >= {threshold}")
    if np.any(means[keep] <= 0):
        bad = ns[keep][means[keep] <= 0].astype(int).tolist()
        raise ValueError(f"mean loss is zero at n={bad}; raise the threshold or drop those points")
    slope, intercept = np.polyfit(np.log(ns[keep]), np.log(means[keep]), 1)
    return float(slope), float(intercept)
