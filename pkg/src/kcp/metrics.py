"""Loss functions between two segmentations of the same ``{1, ..., n}``.

The ``d_inf`` losses and Hausdorff losses are returned in index units;
divide by ``n`` for the normalized versions.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .gram import Segmentation, SegmentationError, as_segmentation

SegLike = Segmentation | Sequence[int]


def _pair(t1: SegLike, t2: SegLike) -> tuple[Segmentation, Segmentation]:
    t1, t2 = as_segmentation(t1), as_segmentation(t2)
    if t1.n != t2.n:
        raise SegmentationError(f"segmentations of different lengths: {t1.n} vs {t2.n}")
    return t1, t2


def _need_inner(tau: Segmentation, name: str):
    if tau.n_segments < 2:
        raise SegmentationError(f"{name} has no inner change-point; the loss is undefined")


def _directed(src: Sequence[int], dst: Sequence[int]) -> int:
    a = np.asarray(src)[:, None]
    b = np.asarray(dst)[None, :]
    return int(np.abs(a - b).min(axis=1).max())


def d_inf_1(t1: SegLike, t2: SegLike) -> int:
    """Largest distance from an inner change-point of `t1` to the nearest inner one of `t2`."""
    t1, t2 = _pair(t1, t2)
    _need_inner(t1, "t1")
    _need_inner(t2, "t2")
    return _directed(t1.inner, t2.inner)


def d_inf_2(t1: SegLike, t2: SegLike) -> int:
    """Like :func:`d_inf_1` but the endpoints ``0`` and ``n`` of `t2` count as targets."""
    t1, t2 = _pair(t1, t2)
    _need_inner(t1, "t1")
    return _directed(t1.inner, t2.boundaries)


def d_inf_3(t1: SegLike, t2: SegLike) -> int:
    """Largest index-matched displacement ``|tau1_i - tau2_i|``; needs equal ``D``."""
    t1, t2 = _pair(t1, t2)
    if t1.n_segments != t2.n_segments:
        raise SegmentationError(
            f"d_inf_3 needs equal numbers of segments, got {t1.n_segments} and {t2.n_segments}"
        )
    _need_inner(t1, "t1")
    return int(np.abs(np.subtract(t1.inner, t2.inner)).max())


def hausdorff_1(t1: SegLike, t2: SegLike) -> int:
    return max(d_inf_1(t1, t2), d_inf_1(t2, t1))


def hausdorff_2(t1: SegLike, t2: SegLike) -> int:
    return max(d_inf_2(t1, t2), d_inf_2(t2, t1))


def projection_matrix(tau: SegLike) -> np.ndarray:
    """Block-averaging matrix: ``1/|lambda|`` when ``i, j`` share segment ``lambda``, else 0."""
    tau = as_segmentation(tau)
    lab = tau.labels()
    same = lab[:, None] == lab[None, :]
    return np.where(same, 1.0 / tau.lengths[lab][:, None], 0.0)


def overlap_counts(t1: SegLike, t2: SegLike) -> np.ndarray:
    """``|lambda1_k  intersect  lambda2_l|`` for every pair of segments."""
    t1, t2 = _pair(t1, t2)
    a1, b1 = np.array(t1.boundaries[:-1]), np.array(t1.boundaries[1:])
    a2, b2 = np.array(t2.boundaries[:-1]), np.array(t2.boundaries[1:])
    lo = np.maximum(a1[:, None], a2[None, :])
    hi = np.minimum(b1[:, None], b2[None, :])
    return np.clip(hi - lo, 0, None)


def frobenius_squared(t1: SegLike, t2: SegLike) -> float:
    """``d_F^2 = D1 + D2 - 2 sum_{k,l} |l1_k & l2_l|^2 / (|l1_k| |l2_l|)``."""
    t1, t2 = _pair(t1, t2)
    inter = overlap_counts(t1, t2).astype(float)
    cross = (inter**2 / np.outer(t1.lengths, t2.lengths)).sum()
    return max(float(t1.n_segments + t2.n_segments - 2.0 * cross), 0.0)


def frobenius(t1: SegLike, t2: SegLike) -> float:
    return float(np.sqrt(frobenius_squared(t1, t2)))


def frobenius_direct(t1: SegLike, t2: SegLike) -> float:
    """``||Pi_1 - Pi_2||_F`` from the dense projection matrices (O(n^2))."""
    t1, t2 = _pair(t1, t2)
    return float(np.linalg.norm(projection_matrix(t1) - projection_matrix(t2)))


@dataclass
class Lemma1Report:
    condition_i: bool
    condition_ii: bool
    passed: bool
    details: dict

    def to_dict(self):
        return asdict(self)


def check_lemma1(t1: SegLike, t2: SegLike) -> Lemma1Report:
    """Check that the losses coincide when the segmentations are close.

    (i)  ``d1/n < min(Lmin1, Lmin2)/2`` implies equal ``D`` and
         ``d_inf_1 = d_inf_2 = d_inf_3 = d_H1 = d_H2``.
    (ii) equal ``D`` and ``d1/n < Lmin1/2`` imply
         ``d_inf_1(t1, t2) = d_inf_1(t2, t1) = d_H1``.
    A condition that cannot be evaluated (a segmentation with ``D = 1``)
    counts as not holding.
    """
    t1, t2 = _pair(t1, t2)
    n = t1.n
    details: dict = {}
    if t1.n_segments < 2 or t2.n_segments < 2:
        same = t1 == t2
        # identical D = 1 segmentations: every loss is vacuous
        return Lemma1Report(False, False, True, {"note": "no inner change-points", "identical": same})

    d1 = d_inf_1(t1, t2)
    details["d_inf_1"] = d1
    cond_i = d1 / n < 0.5 * min(t1.lambda_min, t2.lambda_min)
    cond_ii = t1.n_segments == t2.n_segments and d1 / n < 0.5 * t1.lambda_min
    ok = True
    if cond_i:
        if t1.n_segments != t2.n_segments:
            ok = False
            details["equal_D"] = False
        else:
            vals = [d1, d_inf_2(t1, t2), d_inf_3(t1, t2), hausdorff_1(t1, t2), hausdorff_2(t1, t2)]
            details["losses_i"] = vals
            ok &= len(set(vals)) == 1
    if cond_ii:
        vals = [d1, d_inf_1(t2, t1), hausdorff_1(t1, t2)]
        details["losses_ii"] = vals
        ok &= len(set(vals)) == 1
    return Lemma1Report(bool(cond_i), bool(cond_ii), bool(ok), details)


@dataclass
class Prop1Report:
    upper_hypothesis: bool
    lower_hypothesis: bool
    frobenius_sq: float
    upper_bound: float
    lower_bound: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def check_prop1(t1: SegLike, t2: SegLike, rtol: float = 1e-12) -> Prop1Report:
    """Two-sided comparison between ``d_F^2`` and ``d_inf_1 / n`` for close segmentations.

    Upper bound ``d_F^2 <= 12 D / Lmin1 * d1/n`` when ``d1/n < Lmin1/2``; lower
    bound ``2 / (3 Lmax1) * d1/n <= d_F^2`` when also ``d1/n < Lmin1/3``.
    """
    t1, t2 = _pair(t1, t2)
    if t1.n_segments != t2.n_segments:
        raise SegmentationError("check_prop1 needs equal numbers of segments")
    fsq = frobenius_squared(t1, t2)
    if t1.n_segments < 2:
        return Prop1Report(False, False, fsq, float("nan"), float("nan"), fsq == 0.0)
    r = d_inf_1(t1, t2) / t1.n
    up_h = r < t1.lambda_min / 2
    lo_h = up_h and r < t1.lambda_min / 3
    upper = 12.0 * t1.n_segments / t1.lambda_min * r
    lower = 2.0 / (3.0 * t1.lambda_max) * r
    ok = True
    if up_h:
        ok &= fsq <= upper * (1 + rtol) + rtol
    if lo_h:
        ok &= lower <= fsq * (1 + rtol) + rtol
    return Prop1Report(bool(up_h), bool(lo_h), fsq, upper, lower, bool(ok))


def all_losses(t1: SegLike, t2: SegLike) -> dict:
    """Every loss that is defined for the pair; undefined ones map to ``None``."""
    t1, t2 = _pair(t1, t2)

    def safe(fn, *args):
        try:
            return fn(*args)
        except SegmentationError:
            return None

    return {
        "d_inf_1": safe(d_inf_1, t1, t2),
        "d_inf_1_reversed": safe(d_inf_1, t2, t1),
        "d_inf_2": safe(d_inf_2, t1, t2),
        "d_inf_2_reversed": safe(d_inf_2, t2, t1),
        "d_inf_3": safe(d_inf_3, t1, t2),
        "hausdorff_1": safe(hausdorff_1, t1, t2),
        "hausdorff_2": safe(hausdorff_2, t1, t2),
        "frobenius": frobenius(t1, t2),
        "frobenius_squared": frobenius_squared(t1, t2),
    }
