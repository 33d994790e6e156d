"""Representations of the training label distribution.

Each loss consumes its own form of the prior: a Gaussian mixture (GAI),
binned densities on a regular grid (BNI), the labels of the current batch
(BMC) or class probabilities (balanced softmax).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from .numerics import LOG_2PI, as_label, as_labels, chol_inverse, cholesky, logsumexp

log = logging.getLogger(__name__)

COV_REG = 1e-6


@dataclass(frozen=True)
class GmmPrior:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    # Mean per-sample log-likelihood after each EM iteration; empty if not fitted.
    log_likelihoods: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        cov = np.asarray(self.covs, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None, None]
        k, d = mu.shape
        if k < 1 or w.shape != (k,) or cov.shape != (k, d, d):
            raise ValueError(
                f"inconsistent GMM shapes: weights {w.shape}, means {mu.shape}, covs {cov.shape}"
            )
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("GMM weights must be nonnegative and sum to 1")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise ValueError("GMM parameters must be finite")
        if np.max(np.abs(cov - np.swapaxes(cov, 1, 2))) > 1e-10:
            raise ValueError("GMM covariances must be symmetric")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", cov)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, points, extra_var: float = 0.0) -> np.ndarray:
        """(n, K) array of log N(point; mu_k, Sigma_k + extra_var * I)."""
        y = as_labels(points)
        if y.shape[1] != self.dim:
            raise ValueError(f"dimension mismatch: points d={y.shape[1]}, prior d={self.dim}")
        cov = self.covs + extra_var * np.eye(self.dim)
        inv, logdet = chol_inverse(cholesky(cov))
        diff = y[:, None, :] - self.means[None]
        maha = np.einsum("nki,kij,nkj->nk", diff, inv, diff)
        return -0.5 * (self.dim * LOG_2PI + logdet[None] + maha)

    def log_density(self, points) -> np.ndarray:
        comp = self.component_log_densities(points)
        with np.errstate(divide="ignore"):
            return logsumexp(comp + np.log(self.weights)[None], axis=1)

    def density(self, points) -> np.ndarray:
        return np.exp(self.log_density(points))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        L = cholesky(self.covs)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.einsum("nij,nj->ni", L[comp], z)

    def to_dict(self) -> dict:
        return {
            "kind": "gmm",
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
        }


@dataclass(frozen=True)
class BinnedPrior:
    """Densities at the centers of a regular grid of bins."""

    centers: np.ndarray
    densities: np.ndarray
    bin_width: np.ndarray

    def __post_init__(self):
        c = as_labels(self.centers, "centers")
        dens = np.asarray(self.densities, dtype=float).ravel()
        width = np.atleast_1d(np.asarray(self.bin_width, dtype=float))
        if dens.shape[0] != c.shape[0]:
            raise ValueError("need one density per bin center")
        if width.shape != (c.shape[1],) or np.any(width <= 0):
            raise ValueError("bin_width must be positive, one entry per dimension")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ValueError("densities must be finite and nonnegative")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "densities", dens)
        object.__setattr__(self, "bin_width", width)

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def bin_volume(self) -> float:
        return float(np.prod(self.bin_width))

    @property
    def total_mass(self) -> float:
        return float(self.densities.sum() * self.bin_volume)

    def density(self, points) -> np.ndarray:
        """Piecewise-constant density: value of the bin containing each point."""
        y = as_labels(points)
        lo = self.centers.min(axis=0) - 0.5 * self.bin_width
        n_per_dim = np.rint(
            (self.centers.max(axis=0) - self.centers.min(axis=0)) / self.bin_width
        ).astype(int) + 1
        idx = np.floor((y - lo) / self.bin_width).astype(int)
        idx = np.clip(idx, 0, n_per_dim - 1)
        flat = np.ravel_multi_index(tuple(idx.T), tuple(n_per_dim))
        return self.densities[flat]

    def to_dict(self) -> dict:
        return {
            "kind": "binned",
            "centers": self.centers.tolist(),
            "densities": self.densities.tolist(),
            "bin_width": self.bin_width.tolist(),
        }


@dataclass(frozen=True)
class BatchPrior:
    labels: np.ndarray

    def __post_init__(self):
        y = as_labels(self.labels)
        if y.shape[0] < 2:
            raise ValueError("a batch prior needs at least 2 labels")
        object.__setattr__(self, "labels", y)


@dataclass(frozen=True)
class DiscretePrior:
    classes: tuple
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        classes = tuple(self.classes) if self.classes is not None else tuple(range(p.size))
        if len(classes) != p.size:
            raise ValueError("need one probability per class")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("class probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_counts(cls, counts, classes=None) -> "DiscretePrior":
        c = np.asarray(counts, dtype=float)
        return cls(classes if classes is not None else tuple(range(c.size)), c / c.sum())

    def to_dict(self) -> dict:
        return {"kind": "discrete", "classes": list(self.classes), "probs": self.probs.tolist()}


def _kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [X[rng.integers(X.shape[0])]]
    closest = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining points coincide with a center
            idx = rng.integers(X.shape[0])
        else:
            idx = rng.choice(X.shape[0], p=closest / total)
        centers.append(X[idx])
        closest = np.minimum(closest, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def fit_gmm(labels, K: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-8) -> GmmPrior:
    """Fit a K-component Gaussian mixture by EM.

    Means are seeded by k-means++, every covariance starts at the pooled
    sample covariance and weights start uniform. ``COV_REG * I`` is added to
    each covariance after every M-step. Iteration stops when the relative
    improvement of the log-likelihood drops below ``tol``.
    """
    X = as_labels(labels)
    n, d = X.shape
    if K < 1:
        raise ValueError("K must be at least 1")
    n_distinct = np.unique(X, axis=0).shape[0]
    if n_distinct < K:
        raise ValueError(f"need at least K={K} distinct labels, got {n_distinct}")

    rng = np.random.default_rng(seed)
    eye = np.eye(d)
    means = _kmeans_pp(X, K, rng)
    pooled = np.atleast_2d(np.cov(X.T, bias=True)) + COV_REG * eye
    covs = np.repeat(pooled[None], K, axis=0)
    weights = np.full(K, 1.0 / K)

    history = []
    for it in range(max_iter):
        inv, logdet = chol_inverse(cholesky(covs))
        diff = X[:, None, :] - means[None]
        maha = np.einsum("nki,kij,nkj->nk", diff, inv, diff)
        with np.errstate(divide="ignore"):
            logp = np.log(weights)[None] - 0.5 * (d * LOG_2PI + logdet[None] + maha)
        norm = logsumexp(logp, axis=1)
        ll = float(norm.mean())
        if history:
            prev = history[-1]
            if ll < prev - 1e-9:
                log.warning("EM log-likelihood decreased at iteration %d: %.12g -> %.12g", it, prev, ll)
            history.append(ll)
            if abs(ll - prev) <= tol * abs(prev):
                break
        else:
            history.append(ll)
        resp = np.exp(logp - norm[:, None])
        nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
        weights = nk / nk.sum()
        means = (resp.T @ X) / nk[:, None]
        diff = X[:, None, :] - means[None]
        covs = np.einsum("nk,nki,nkj->kij", resp, diff, diff) / nk[:, None, None]
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2)) + COV_REG * eye
    weights = weights / weights.sum()
    log.debug("EM finished after %d iterations, mean log-likelihood %.6f", len(history), history[-1])
    return GmmPrior(weights, means, covs, log_likelihoods=tuple(history))


def gmm_log_density(prior: GmmPrior, point) -> float:
    p = as_label(point, "point")
    if p.shape[0] != prior.dim:
        raise ValueError(f"dimension mismatch: point d={p.shape[0]}, prior d={prior.dim}")
    return float(prior.log_density(p[None])[0])


def _smooth_local_linear(counts: np.ndarray, sigma_bins: np.ndarray) -> np.ndarray:
    """Gaussian smoothing along each axis with a local-linear boundary correction.

    Away from the edges this is plain Gaussian smoothing. Within a few
    kernel widths of an edge the kernel is one-sided, and fitting a local line
    instead of a local constant removes the bias a sloped density would get.
    """
    out = counts
    for axis, sig in enumerate(sigma_bins):
        if sig <= 0:
            continue
        r = int(np.ceil(4.0 * sig))
        u = np.arange(-r, r + 1, dtype=float)
        k = np.exp(-0.5 * (u / sig) ** 2)
        corr = lambda a, w: correlate1d(a, w, axis=axis, mode="constant", cval=0.0)
        ones = np.ones_like(out)
        s0, s1, s2 = corr(ones, k), corr(ones, k * u), corr(ones, k * u * u)
        t0, t1 = corr(out, k), corr(out, k * u)
        out = np.maximum((s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1), 0.0)
    return out


def fit_binned(labels, n_bins: int, range, smoothing_bandwidth: float | None = None) -> BinnedPrior:
    """Histogram the labels on an even grid and smooth with a Gaussian kernel.

    Smoothing is boundary-corrected (see ``_smooth_local_linear``).

    ``range`` is a (low, high) pair applied to every dimension, or a sequence
    of such pairs. ``smoothing_bandwidth`` is in label units; ``None`` means
    two bin widths, 0 keeps the raw histogram. Out-of-range labels are
    clamped into the edge bins.
    """
    X = as_labels(labels)
    n, d = X.shape
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    bounds = np.asarray(range, dtype=float)
    if bounds.ndim == 1:
        bounds = np.tile(bounds, (d, 1))
    if bounds.shape != (d, 2):
        raise ValueError(f"range must give (low, high) for each of {d} dimensions")
    low, high = bounds[:, 0], bounds[:, 1]
    if np.any(high <= low):
        raise ValueError("range high must exceed low")
    inside = np.all((X >= low) & (X <= high), axis=1)
    if not inside.any():
        raise ValueError("all labels fall outside the bin range")

    width = (high - low) / n_bins
    idx = np.clip(np.floor((X - low) / width).astype(int), 0, n_bins - 1)
    counts = np.zeros((n_bins,) * d)
    np.add.at(counts, tuple(idx.T), 1.0)

    bw = 2.0 * width if smoothing_bandwidth is None else np.full(d, float(smoothing_bandwidth))
    if np.any(bw < 0):
        raise ValueError("smoothing_bandwidth must be nonnegative")
    if np.any(bw > 0):
        counts = _smooth_local_linear(counts, bw / width)

    axes = [low[j] + width[j] * (np.arange(n_bins) + 0.5) for j in np.arange(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    dens = counts.ravel()
    dens = dens / (dens.sum() * np.prod(width))
    return BinnedPrior(grid, dens, width)


def prior_to_json(prior) -> str:
    return json.dumps(prior.to_dict())


def prior_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "gmm":
        return GmmPrior(doc["weights"], doc["means"], doc["covs"])
    if kind == "binned":
        return BinnedPrior(doc["centers"], doc["densities"], doc["bin_width"])
    if kind == "discrete":
        return DiscretePrior(doc["classes"], doc["probs"])
    raise ValueError(f"unknown prior kind {kind!r}")


def prior_from_json(text: str):
    return prior_from_dict(json.loads(text))
