"""Exact segmentation by dynamic programming and penalized model selection.

``solve_all_d`` runs the Bellman recursion

    V_D(b) = min_{a < b} V_{D-1}(a) + cost(a, b),   V_1(b) = cost(0, b)

over end indices ``b`` for every number of segments ``D <= d_max``;
``select_penalized`` then minimizes ``r_D + C M^2 D / n`` over ``D``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gram import GramMatrix, Segmentation

DEFAULT_D_MAX = 30
TIE_REL = 1e-12


class InfeasibleError(ValueError):
    """Requested number of segments cannot be met under the length constraint."""


class CalibrationError(RuntimeError):
    """The penalty-constant sweep carries no information (no dimension jump)."""


@dataclass
class RiskProfile:
    """Minimal risks ``r_D`` and their argmin segmentations, ``D = 1..max_segments``."""

    min_seg_len: int
    risks: np.ndarray
    segmentations: list[Segmentation]

    @property
    def max_segments(self) -> int:
        return len(self.segmentations)

    @property
    def n(self) -> int:
        return self.segmentations[0].n

    def risk(self, d: int) -> float:
        return float(self.risks[d - 1])

    def segmentation(self, d: int) -> Segmentation:
        return self.segmentations[d - 1]

    @property
    def per_d(self) -> list[tuple[float, Segmentation]]:
        return list(zip(self.risks.tolist(), self.segmentations))

    def to_dict(self) -> dict:
        return {
            "min_seg_len": int(self.min_seg_len),
            "per_d": [
                {"d": d + 1, "risk": float(r), "boundaries": s.to_list()}
                for d, (r, s) in enumerate(zip(self.risks, self.segmentations))
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RiskProfile":
        rows = sorted(data["per_d"], key=lambda row: row["d"])
        if [row["d"] for row in rows] != list(range(1, len(rows) + 1)):
            raise ValueError("per_d must list d = 1 .. D_max without gaps")
        return cls(
            int(data["min_seg_len"]),
            np.array([row["risk"] for row in rows], dtype=float),
            [Segmentation(row["boundaries"]) for row in rows],
        )

    @classmethod
    def from_risks(cls, risks: Sequence[float], n: int) -> "RiskProfile":
        """Profile with given risks and placeholder segmentations.

        Handy for studying the selection step in isolation; the segmentation
        for ``D`` puts its change-points at ``1, ..., D-1``.
        """
        risks = np.asarray(risks, dtype=float)
        if len(risks) > n:
            raise ValueError("cannot have more segments than observations")
        segs = [Segmentation([*range(d), n]) for d in range(1, len(risks) + 1)]
        return cls(1, risks, segs)


@dataclass(frozen=True)
class PenaltySpec:
    """Linear penalty ``C * M^2 * D / n``."""

    C: float
    M_squared: float

    def __post_init__(self):
        if not self.C >= 0:
            raise ValueError("penalty constant C must be nonnegative")
        if not self.M_squared > 0:
            raise ValueError("M_squared must be positive")

    @classmethod
    def for_gram(cls, C: float, gram: GramMatrix, M_squared: float | None = None) -> "PenaltySpec":
        """Penalty whose ``M^2`` defaults to the largest Gram diagonal entry."""
        emp = gram.max_diag
        if M_squared is None:
            M_squared = emp
        elif M_squared < emp - 1e-12:
            raise ValueError(f"M_squared={M_squared} is below the largest k(X_i, X_i)={emp}")
        return cls(C, M_squared)

    def __call__(self, d: int | np.ndarray, n: int):
        return self.C * self.M_squared * d / n


def _argmin_last(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Index of the minimum along `axis`, preferring the largest index among near-ties."""
    best = values.min(axis=axis, keepdims=True)
    tol = TIE_REL * np.maximum(np.abs(best), 1.0)
    hit = values <= best + tol
    rev = np.flip(hit, axis=axis)
    return values.shape[axis] - 1 - np.argmax(rev, axis=axis)


def _bellman(cost: np.ndarray, d_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Value and back-pointer tables, both of shape (d_max, n + 1)."""
    n = cost.shape[0] - 1
    value = np.full((d_max, n + 1), np.inf)
    back = np.zeros((d_max, n + 1), dtype=np.int64)
    value[0] = cost[0]
    for d in range(1, d_max):
        prev = value[d - 1]
        ok = np.isfinite(prev)
        if not ok.any():
            break
        rows = np.flatnonzero(ok)
        cand = prev[rows][:, None] + cost[rows]
        arg = _argmin_last(cand, axis=0)
        value[d] = cand[arg, np.arange(n + 1)]
        back[d] = rows[arg]
    return value, back


def _backtrack(back: np.ndarray, d: int, n: int) -> Segmentation:
    bounds = [n]
    b = n
    for layer in range(d - 1, 0, -1):
        b = int(back[layer, b])
        bounds.append(b)
    bounds.append(0)
    return Segmentation(reversed(bounds))


def solve_all_d(gram: GramMatrix, d_max: int = DEFAULT_D_MAX, min_seg_len: int = 1) -> RiskProfile:
    """Exact minimal risk for every number of segments ``1..d_max``.

    Parameters
    ----------
    gram : GramMatrix
    d_max : int
        Largest number of segments. Must satisfy ``d_max * min_seg_len <= n``.
    min_seg_len : int
        Segments shorter than this are excluded.

    Returns
    -------
    RiskProfile

    Notes
    -----
    Runs in ``O(n^2 d_max)`` time and ``O(n^2)`` memory. Among change-points
    giving equal cost (relative ``1e-12``) the later one is kept.
    """
    n = gram.n
    min_seg_len = int(min_seg_len)
    if min_seg_len < 1:
        raise InfeasibleError("min_seg_len must be >= 1")
    if d_max < 1 or d_max * min_seg_len > n:
        raise InfeasibleError(f"d_max={d_max} segments of length >= {min_seg_len} do not fit in n={n}")
    value, back = _bellman(gram.cost_matrix(min_seg_len), d_max)
    risks = value[:, n] / n
    segs = [_backtrack(back, d, n) for d in range(1, d_max + 1)]
    return RiskProfile(min_seg_len, risks, segs)


def select_penalized(profile: RiskProfile, pen: PenaltySpec, n: int | None = None) -> Segmentation:
    """Segmentation minimizing ``r_D + pen(D)``; ties go to the smaller ``D``."""
    return profile.segmentation(select_dimension(profile, pen, n))


def select_dimension(profile: RiskProfile, pen: PenaltySpec, n: int | None = None) -> int:
    n = profile.n if n is None else n
    d = np.arange(1, profile.max_segments + 1)
    crit = profile.risks + pen(d, n)
    # argmin returns the first hit, so exact ties resolve to the smaller D
    return int(np.argmin(crit)) + 1


def min_length(n: int, delta_n: float) -> int:
    """Smallest admissible segment length ``ceil(n * delta_n)``, at least 1."""
    return max(1, math.ceil(n * delta_n - 1e-9))


def solve_fixed_d(gram: GramMatrix, d: int, delta_n: float = 0.0) -> Segmentation:
    """Minimal-risk segmentation with exactly `d` segments of length ``>= n * delta_n``."""
    if d < 1:
        raise InfeasibleError("d must be >= 1")
    m = min_length(gram.n, delta_n)
    if d * m > gram.n:
        raise InfeasibleError(f"{d} segments of length >= {m} do not fit in n={gram.n}")
    if d == 1:
        return Segmentation([0, gram.n])
    value, back = _bellman(gram.cost_matrix(m), d)
    return _backtrack(back, d, gram.n)


def default_c_grid() -> np.ndarray:
    """60 log-spaced penalty constants between 1e-3 and 1e3."""
    return np.logspace(-3, 3, 60)


@dataclass
class Calibration:
    """Outcome of the dimension-jump sweep."""

    c_grid: np.ndarray
    dims: np.ndarray
    c_jump: float
    c_selected: float
    jump_size: int = field(default=0)


def dimension_sweep(profile: RiskProfile, m_squared: float, n: int, c_grid: Sequence[float]) -> np.ndarray:
    return np.array([select_dimension(profile, PenaltySpec(c, m_squared), n) for c in c_grid])


def calibrate(profile: RiskProfile, m_squared: float, n: int, c_grid: Sequence[float] | None = None) -> Calibration:
    """Dimension-jump calibration of the penalty constant.

    Sweeps ``C`` over `c_grid`, finds the grid point right after the
    largest drop of the selected dimension (the first one on ties) and
    returns twice that value.
    """
    c_grid = default_c_grid() if c_grid is None else np.asarray(c_grid, dtype=float)
    if len(c_grid) < 20 or np.any(np.diff(c_grid) <= 0) or c_grid[0] <= 0:
        raise ValueError("c_grid must be positive, strictly increasing, with >= 20 points")
    if c_grid[-1] / c_grid[0] < 1e3:
        raise ValueError("c_grid must span at least three orders of magnitude")
    dims = dimension_sweep(profile, m_squared, n, c_grid)
    drops = dims[:-1] - dims[1:]
    if drops.max() <= 0:
        raise CalibrationError(
            f"selected dimension is constant (D={dims[0]}) over the whole C grid; no dimension jump"
        )
    i = int(np.argmax(drops))
    c_jump = float(c_grid[i + 1])
    return Calibration(c_grid, dims, c_jump, 2.0 * c_jump, int(drops[i]))


def calibrate_c(profile: RiskProfile, m_squared: float, n: int, c_grid: Sequence[float] | None = None) -> float:
    return calibrate(profile, m_squared, n, c_grid).c_selected


def _log_term(y: float, n: float) -> float:
    return y + math.log(n) + 1.0


def theorem1_diagnostics(d_star: int, lambda_min: float, delta_min: float, m_squared: float,
                         n: float, y: float) -> tuple[float, float, float]:
    """``(C_min, C_max, v1)`` of the consistency theorem for bounded kernels.

    `delta_min` is the smallest jump size (not squared) and `lambda_min`
    the normalized length of the shortest true segment.
    """
    snr = delta_min**2 / m_squared
    c_min = 74.0 / 3.0 * (d_star + 1) * _log_term(y, n)
    c_max = snr * lambda_min * n / (6.0 * d_star)
    v1 = 148.0 * d_star / snr * _log_term(y, n) / n
    return c_min, c_max, v1


def theorem2_v2(d_star: int, delta_min: float, delta_max: float, variance_bound: float,
                n: float, y: float, delta_n: float) -> float:
    """Localization bound ``v2(y, delta_n)`` under a finite-variance assumption."""
    dmin2 = delta_min**2
    return (24.0 * d_star**2 * delta_max * math.sqrt(variance_bound) / dmin2 * y / math.sqrt(n)
            + 8.0 * d_star * variance_bound / dmin2 * y**2 / (n * delta_n))


def frobenius_bound(d_star: int, lambda_min: float, delta_min: float, m_squared: float,
                    n: float, y: float) -> float:
    """Upper bound on ``d_F(tau*, tau_hat)`` implied by the consistency theorem."""
    return (43.0 * d_star / math.sqrt(lambda_min) * math.sqrt(m_squared) / delta_min
            * math.sqrt(_log_term(y, n) / n))
