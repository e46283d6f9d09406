"""Positive semidefinite kernels on R^p and bandwidth selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.spatial.distance import pdist

FAMILIES = ("linear", "polynomial", "gaussian", "laplace", "chi_squared")
SIMPLEX_TOL = 1e-9


class KernelError(ValueError):
    """Invalid kernel parameters or inputs outside a kernel's domain."""


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family together with its parameters.

    Attributes
    ----------
    family : str
        One of ``linear``, ``polynomial``, ``gaussian``, ``laplace``,
        ``chi_squared``.
    degree : int, optional
        Polynomial degree (polynomial only).
    bandwidth : float or "median", optional
        Bandwidth ``h`` for gaussian/laplace. The string ``"median"`` is a
        placeholder that must be resolved with :meth:`resolve` before use.
    """

    family: str
    degree: int | None = None
    bandwidth: float | str | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if self.family == "polynomial":
            if self.degree is None or int(self.degree) != self.degree or self.degree < 1:
                raise KernelError("polynomial kernel needs an integer degree >= 1")
        if self.family in ("gaussian", "laplace"):
            if self.bandwidth is None:
                raise KernelError(f"{self.family} kernel needs a bandwidth")
            if isinstance(self.bandwidth, str):
                if self.bandwidth != "median":
                    raise KernelError(f"bandwidth must be a positive real or 'median', got {self.bandwidth!r}")
            elif not self.bandwidth > 0:
                raise KernelError("bandwidth must be > 0")

    @property
    def needs_resolution(self) -> bool:
        return self.bandwidth == "median"

    def resolve(self, series) -> "KernelSpec":
        """Replace a ``"median"`` bandwidth by the median heuristic on `series`."""
        if not self.needs_resolution:
            return self
        return KernelSpec(self.family, self.degree, median_heuristic(series))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"family": self.family}
        if self.degree is not None:
            out["degree"] = int(self.degree)
        if self.bandwidth is not None:
            out["bandwidth"] = self.bandwidth if isinstance(self.bandwidth, str) else float(self.bandwidth)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "KernelSpec":
        unknown = set(data) - {"family", "degree", "bandwidth"}
        if unknown:
            raise KernelError(f"unknown kernel fields: {sorted(unknown)}")
        bw = data.get("bandwidth")
        if bw is not None and not isinstance(bw, str):
            bw = float(bw)
        return cls(data["family"], data.get("degree"), bw)


def as_series(series) -> np.ndarray:
    """Return `series` as a float array of shape (n, d)."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise KernelError(f"series must be 1-d or 2-d, got shape {x.shape}")
    return x


def _check_simplex(x: np.ndarray):
    if np.any(x < -SIMPLEX_TOL) or np.any(np.abs(x.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise KernelError("chi_squared kernel requires points on the probability simplex")


def _sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # direct differences: exact zeros on the diagonal, unlike the |x|^2+|y|^2-2<x,y> trick
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _chi2_sum(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    num = (x[:, None, :] - y[None, :, :]) ** 2
    den = x[:, None, :] + y[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return terms.sum(axis=-1)


def kernel_matrix(spec: KernelSpec, x, y=None) -> np.ndarray:
    """Cross-kernel matrix ``K[i, j] = k(x_i, y_j)``.

    With ``y=None`` the Gram matrix of `x` is returned and symmetrized so
    that ``K == K.T`` holds exactly.
    """
    if spec.needs_resolution:
        raise KernelError("resolve the 'median' bandwidth before evaluating the kernel")
    x = as_series(x)
    same = y is None
    y = x if same else as_series(y)
    if x.shape[1] != y.shape[1]:
        raise KernelError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")

    fam = spec.family
    if fam == "linear":
        k = x @ y.T
    elif fam == "polynomial":
        k = (x @ y.T + 1.0) ** int(spec.degree)
    elif fam == "gaussian":
        k = np.exp(-_sq_dists(x, y) / (2.0 * spec.bandwidth**2))
    elif fam == "laplace":
        # exponent uses 2h^2 in the denominator, not 2h
        k = np.exp(-np.sqrt(_sq_dists(x, y)) / (2.0 * spec.bandwidth**2))
    else:
        _check_simplex(x)
        if not same:
            _check_simplex(y)
        k = np.exp(-0.5 * _chi2_sum(x, y))
    if same:
        k = np.triu(k) + np.triu(k, 1).T
    return k


def evaluate(spec: KernelSpec, x, y) -> float:
    """Evaluate ``k(x, y)`` for two single observations."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise KernelError(f"dimension mismatch: {x.shape} vs {y.shape}")
    # order the pair so that k(x, y) == k(y, x) bit for bit
    a, b = sorted((x, y), key=lambda v: tuple(v))
    return float(kernel_matrix(spec, a[None, :], b[None, :])[0, 0])


def median_heuristic(series) -> float:
    """Median of the pairwise Euclidean distances ``|X_i - X_j|``, ``i < j``.

    With an even number of pairs the two central order statistics are
    averaged.
    """
    x = as_series(series)
    n = x.shape[0]
    if n < 2:
        raise KernelError("median heuristic needs at least two observations")
    d = pdist(x)
    if not np.any(d > 0):
        raise KernelError("degenerate series: all pairwise distances are zero")
    return float(np.median(d))
