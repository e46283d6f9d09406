"""Gram matrices, segmentations and the kernel least-squares risk.

The Gram matrix is materialized in full (``8 n^2`` bytes) together with a
2-d prefix-sum table of the same size, so the cost of any segment is an
O(1) query.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .kernels import KernelSpec, as_series, kernel_matrix

# segment costs within this fraction of the trace below zero are PSD rounding noise
CLAMP_REL = 1e-9


class SegmentationError(ValueError):
    """Malformed boundaries or indices outside the series."""


@dataclass(frozen=True)
class Segmentation:
    """Boundaries ``0 = tau_0 < tau_1 < ... < tau_D = n``.

    Segment ``l`` (1-based) covers observations ``tau_{l-1}+1 .. tau_l``,
    i.e. the Python slice ``[tau_{l-1}:tau_l]``.
    """

    boundaries: tuple[int, ...]

    def __init__(self, boundaries: Iterable[int]):
        b = tuple(int(t) for t in boundaries)
        if len(b) < 2 or b[0] != 0:
            raise SegmentationError(f"boundaries must start at 0 and contain n: {list(b)}")
        if any(t1 >= t2 for t1, t2 in zip(b, b[1:])):
            raise SegmentationError(f"boundaries must be strictly increasing: {list(b)}")
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def from_changepoints(cls, changepoints: Iterable[int], n: int) -> "Segmentation":
        return cls([0, *sorted(int(c) for c in changepoints), n])

    @classmethod
    def trivial(cls, n: int) -> "Segmentation":
        """The segmentation with ``n`` singleton segments."""
        return cls(range(n + 1))

    @property
    def n(self) -> int:
        return self.boundaries[-1]

    @property
    def n_segments(self) -> int:
        return len(self.boundaries) - 1

    @property
    def inner(self) -> tuple[int, ...]:
        """Inner change-points ``tau_1 .. tau_{D-1}``."""
        return self.boundaries[1:-1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def lambda_min(self) -> float:
        return float(self.lengths.min()) / self.n

    @property
    def lambda_max(self) -> float:
        return float(self.lengths.max()) / self.n

    def segments(self) -> list[tuple[int, int]]:
        """Half-open index pairs ``(a, b)`` of each segment."""
        return list(zip(self.boundaries[:-1], self.boundaries[1:]))

    def labels(self) -> np.ndarray:
        """Segment index (0-based) of each observation."""
        return np.repeat(np.arange(self.n_segments), self.lengths)

    def refine(self, changepoint: int) -> "Segmentation":
        if changepoint in self.boundaries:
            raise SegmentationError(f"{changepoint} is already a boundary")
        return Segmentation(sorted((*self.boundaries, changepoint)))

    def to_list(self) -> list[int]:
        return list(self.boundaries)

    def __len__(self):
        return len(self.boundaries)

    def __iter__(self):
        return iter(self.boundaries)


def as_segmentation(tau: Segmentation | Sequence[int]) -> Segmentation:
    return tau if isinstance(tau, Segmentation) else Segmentation(tau)


class GramMatrix:
    """Gram matrix of a series with prefix sums for O(1) block queries.

    Parameters
    ----------
    entries : ndarray, shape (n, n)
        Symmetric positive semidefinite matrix ``K[i, j] = k(X_i, X_j)``.

    Attributes
    ----------
    diag_prefix : ndarray, shape (n + 1,)
        ``diag_prefix[b] = sum_{i < b} K[i, i]``.
    block_prefix : ndarray, shape (n + 1, n + 1)
        ``block_prefix[a, b] = sum_{i < a, j < b} K[i, j]``.
    """

    def __init__(self, entries):
        k = np.array(entries, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError(f"Gram matrix must be square, got shape {k.shape}")
        if not np.array_equal(k, k.T):
            raise ValueError("Gram matrix must be exactly symmetric")
        k.setflags(write=False)
        self.entries = k
        self.n = k.shape[0]
        dp = np.zeros(self.n + 1)
        np.cumsum(np.diag(k), out=dp[1:])
        bp = np.zeros((self.n + 1, self.n + 1))
        np.cumsum(np.cumsum(k, axis=0), axis=1, out=bp[1:, 1:])
        dp.setflags(write=False)
        bp.setflags(write=False)
        self.diag_prefix = dp
        self.block_prefix = bp
        self.trace = float(dp[-1])

    @property
    def max_diag(self) -> float:
        return float(np.max(np.diag(self.entries)))

    def _check(self, a: int, b: int):
        if not (0 <= a < b <= self.n):
            raise SegmentationError(f"need 0 <= a < b <= n={self.n}, got a={a}, b={b}")

    def block_sum(self, a: int, b: int) -> float:
        """``sum_{a <= i, j < b} K[i, j]``."""
        self._check(a, b)
        bp = self.block_prefix
        return float(bp[b, b] - bp[a, b] - bp[b, a] + bp[a, a])

    def segment_cost(self, a: int, b: int) -> float:
        """Contribution of segment ``{a+1, ..., b}`` to ``n * risk``."""
        self._check(a, b)
        if b - a == 1:
            return 0.0
        cost = (self.diag_prefix[b] - self.diag_prefix[a]) - self.block_sum(a, b) / (b - a)
        return max(float(cost), 0.0) if cost > -CLAMP_REL * abs(self.trace) else float(cost)

    def cost_matrix(self, min_seg_len: int = 1) -> np.ndarray:
        """All segment costs at once.

        Returns an ``(n + 1, n + 1)`` array whose entry ``[a, b]`` is the cost
        of ``{a+1, ..., b}`` when ``b - a >= min_seg_len`` and ``inf``
        otherwise (including ``a >= b``).
        """
        n = self.n
        bp = self.block_prefix
        dp = self.diag_prefix
        d = np.diag(bp)
        length = np.arange(n + 1)[None, :] - np.arange(n + 1)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            block = d[None, :] - bp - bp.T + d[:, None]
            cost = (dp[None, :] - dp[:, None]) - block / length
        noise = (cost < 0) & (cost > -CLAMP_REL * abs(self.trace))
        cost[noise] = 0.0
        cost[length == 1] = 0.0
        cost[length < max(min_seg_len, 1)] = np.inf
        return cost


def build_gram(spec: KernelSpec, series) -> GramMatrix:
    """Evaluate `spec` on every pair of observations of `series`."""
    x = as_series(series)
    if x.shape[0] < 2:
        raise ValueError("a series needs at least two observations")
    return GramMatrix(kernel_matrix(spec.resolve(x), x))


def segment_cost(gram: GramMatrix, a: int, b: int) -> float:
    return gram.segment_cost(a, b)


def empirical_risk(gram: GramMatrix, tau: Segmentation | Sequence[int]) -> float:
    """Kernel least-squares risk of `tau`, normalized by ``n``."""
    tau = as_segmentation(tau)
    if tau.n != gram.n:
        raise SegmentationError(f"segmentation ends at {tau.n} but the series has n={gram.n}")
    return sum(gram.segment_cost(a, b) for a, b in tau.segments()) / gram.n
