"""Synthetic benchmark: datasets, balanced metrics and sweep runner."""
from .datasets import LabelDistSpec, OracleFn, SyntheticDataset, generate, label_dist
from .metrics import EvalReport, RegionSpec, balanced_mae, eval_model, marginal_hist_l1
from .runner import METHODS, PRESETS, ComparisonResult, run_comparison, run_one

__all__ = [
    "LabelDistSpec", "OracleFn", "SyntheticDataset", "generate", "label_dist",
    "EvalReport", "RegionSpec", "balanced_mae", "eval_model", "marginal_hist_l1",
    "METHODS", "PRESETS", "ComparisonResult", "run_comparison", "run_one",
]
