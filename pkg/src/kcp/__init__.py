"""Kernel change-point detection by penalized kernel least squares."""
from .gram import GramMatrix, Segmentation, SegmentationError, build_gram, empirical_risk, segment_cost
from .kernels import KernelError, KernelSpec, evaluate, kernel_matrix, median_heuristic
from .segmenter import (CalibrationError, InfeasibleError, PenaltySpec, RiskProfile, calibrate,
                        calibrate_c, select_penalized, solve_all_d, solve_fixed_d, theorem1_diagnostics,
                        theorem2_v2)

__all__ = [
    "CalibrationError", "GramMatrix", "InfeasibleError", "KernelError", "KernelSpec", "PenaltySpec",
    "RiskProfile", "Segmentation", "SegmentationError", "build_gram", "calibrate", "calibrate_c",
    "empirical_risk", "evaluate", "kernel_matrix", "median_heuristic", "segment_cost",
    "select_penalized", "solve_all_d", "solve_fixed_d", "theorem1_diagnostics", "theorem2_v2",
]
__version__ = "0.1.0"
