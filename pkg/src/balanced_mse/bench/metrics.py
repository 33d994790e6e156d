"""Oracle and balanced ("b-") metrics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..models import ModelParams, forward


@dataclass(frozen=True)
class RegionSpec:
    """Even partition of the label range into ``n_regions`` regions.

    For d > 1 the partition is over the distance to the center of the label
    box, from 0 to the half-diagonal.
    """

    low: tuple
    high: tuple
    n_regions: int = 100

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.low, dtype=float))
        hi = np.atleast_1d(np.asarray(self.high, dtype=float))
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("region bounds need high > low in every dimension")
        if self.n_regions < 1:
            raise ValueError("n_regions must be positive")
        object.__setattr__(self, "low", tuple(lo.tolist()))
        object.__setattr__(self, "high", tuple(hi.tolist()))

    @classmethod
    def from_bounds(cls, bounds, n_regions: int = 100) -> "RegionSpec":
        b = np.asarray(bounds, dtype=float).reshape(-1, 2)
        return cls(tuple(b[:, 0]), tuple(b[:, 1]), n_regions)

    @property
    def dim(self) -> int:
        return len(self.low)

    @property
    def boundaries(self) -> np.ndarray:
        if self.dim == 1:
            return np.linspace(self.low[0], self.high[0], self.n_regions + 1)
        half_diag = 0.5 * np.linalg.norm(np.subtract(self.high, self.low))
        return np.linspace(0.0, half_diag, self.n_regions + 1)

    def coordinate(self, labels) -> np.ndarray:
        y = np.asarray(labels, dtype=float).reshape(-1, self.dim)
        if self.dim == 1:
            return y[:, 0]
        center = 0.5 * (np.asarray(self.low) + np.asarray(self.high))
        return np.linalg.norm(y - center, axis=1)

    def assign(self, labels) -> np.ndarray:
        edges = self.boundaries
        idx = np.searchsorted(edges, self.coordinate(labels), side="right") - 1
        return np.clip(idx, 0, self.n_regions - 1)


def balanced_mae(abs_errors, region_index, n_regions: int):
    """Returns (bmae, per-region MAE with NaN for empty regions, empty count)."""
    err = np.asarray(abs_errors, dtype=float)
    idx = np.asarray(region_index, dtype=int)
    sums = np.bincount(idx, weights=err, minlength=n_regions)
    counts = np.bincount(idx, minlength=n_regions)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_region = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    nonempty = counts > 0
    return float(np.mean(per_region[nonempty])), per_region, int((~nonempty).sum())


def marginal_hist_l1(preds, low, high, n_bins: int = 10) -> float:
    """L1 distance between each marginal histogram of ``preds`` and the uniform one.

    Predictions outside [low, high] count fully as mismatch; averaged over dims.
    """
    p = np.asarray(preds, dtype=float)
    p = p.reshape(p.shape[0], -1)
    lo = np.atleast_1d(low)
    hi = np.atleast_1d(high)
    total = 0.0
    for j in range(p.shape[1]):
        inside = (p[:, j] >= lo[j]) & (p[:, j] <= hi[j])
        hist, _ = np.histogram(p[inside, j], bins=n_bins, range=(lo[j], hi[j]))
        freq = hist / p.shape[0]
        total += np.abs(freq - 1.0 / n_bins).sum() + (~inside).mean()
    return float(total / p.shape[1])


@dataclass
class EvalReport:
    mse_vs_oracle: float
    mae: float
    bmae: float
    per_region_mae: np.ndarray = field(repr=False)
    empty_regions: int
    marginal_hist_l1: float

    def to_dict(self) -> dict:
        return {
            "mse_vs_oracle": self.mse_vs_oracle,
            "mae": self.mae,
            "bmae": self.bmae,
            "per_region_mae": [None if np.isnan(v) else float(v) for v in self.per_region_mae],
            "empty_regions": self.empty_regions,
            "marginal_hist_l1": self.marginal_hist_l1,
        }


def evaluate_predictions(preds, labels, regions: RegionSpec, hist_bins: int = 10) -> EvalReport:
    p = np.asarray(preds, dtype=float).reshape(len(preds), -1)
    y = np.asarray(labels, dtype=float).reshape(p.shape)
    if y.shape[0] == 0:
        raise ValueError("empty test set")
    err = p - y
    abs_err = np.linalg.norm(err, axis=1)
    bmae, per_region, empty = balanced_mae(abs_err, regions.assign(y), regions.n_regions)
    return EvalReport(
        mse_vs_oracle=float(np.mean(np.sum(err * err, axis=1))),
        mae=float(abs_err.mean()),
        bmae=bmae,
        per_region_mae=per_region,
        empty_regions=empty,
        marginal_hist_l1=marginal_hist_l1(p, regions.low, regions.high, hist_bins),
    )


def eval_model(model: ModelParams, test, regions: RegionSpec | None = None,
               hist_bins: int = 10) -> EvalReport:
    """Score a model on a noiseless test split against the oracle labels."""
    if getattr(test, "split", "test") != "test":
        raise ValueError("eval_model expects a test split")
    if len(test.x) == 0:
        raise ValueError("empty test set")
    if regions is None:
        regions = RegionSpec.from_bounds(test.spec.bounds)
    return evaluate_predictions(forward(model, test.x), test.y, regions, hist_bins)
