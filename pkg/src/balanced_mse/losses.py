"""Regression losses for imbalanced label distributions, with analytic gradients.

The ``*_batch`` kernels evaluate n samples at once and return per-sample
values, gradients w.r.t. the predictions and w.r.t. ``log(sigma)``. The
per-sample functions (``gai_loss`` etc.) wrap them and return a
:class:`LossEval`.

Balanced losses are defined up to the constant ``-log p_train(y)`` of the
target, which is dropped.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import (
    LOG_2PI,
    IsotropicGaussian,
    as_label,
    as_labels,
    chol_inverse,
    cholesky,
    logsumexp,
    logsumexp_parts,
)
from .priors import BatchPrior, BinnedPrior, DiscretePrior, GmmPrior

DEFAULT_CLIP = 1e4


class LossKind(str, Enum):
    MSE = "mse"
    REWEIGHT = "reweight"
    GAI = "gai"
    BMC = "bmc"
    BNI = "bni"
    BALANCED_SOFTMAX = "balanced_softmax"

    @property
    def uses_sigma(self) -> bool:
        return self in (LossKind.GAI, LossKind.BMC, LossKind.BNI)


@dataclass
class NoiseScale:
    """Noise scale kept as ``log_sigma`` so that sigma stays positive."""

    log_sigma: float = 0.0
    learnable: bool = True

    @classmethod
    def from_sigma(cls, sigma: float, learnable: bool = True) -> "NoiseScale":
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        return cls(float(np.log(sigma)), learnable)

    @property
    def sigma(self) -> float:
        return float(np.exp(self.log_sigma))


@dataclass(frozen=True)
class LossEval:
    value: float
    grad_pred: np.ndarray
    grad_log_sigma: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise FloatingPointError(f"non-finite loss value {self.value}")
        if not (np.all(np.isfinite(self.grad_pred)) and np.isfinite(self.grad_log_sigma)):
            raise FloatingPointError("non-finite loss gradient")


def _check_pair(targets, preds):
    t = as_labels(targets, "targets")
    p = as_labels(preds, "preds")
    if t.shape != p.shape:
        raise ValueError(f"dimension mismatch: targets {t.shape} vs preds {p.shape}")
    return t, p


def _nll_part(t, p, sigma):
    """-log N(t; p, sigma^2 I) with its gradients."""
    d = t.shape[1]
    sq = np.sum((p - t) ** 2, axis=1)
    var = sigma * sigma
    value = 0.5 * d * LOG_2PI + d * np.log(sigma) + sq / (2.0 * var)
    return value, (p - t) / var, d - sq / var


# ---------------------------------------------------------------------------
# batch kernels
# ---------------------------------------------------------------------------

def mse_batch(targets, preds):
    t, p = _check_pair(targets, preds)
    diff = p - t
    return np.sum(diff * diff, axis=1), 2.0 * diff, np.zeros(t.shape[0])


def reweighted_mse_batch(targets, preds, weights):
    value, grad, gs = mse_batch(targets, preds)
    w = np.asarray(weights, dtype=float)
    return w * value, w[:, None] * grad, gs


def inverse_frequency_weights(densities, clip: float = DEFAULT_CLIP) -> np.ndarray:
    """``min(1/density, clip)``; zero density maps to ``clip``."""
    dens = np.asarray(densities, dtype=float)
    with np.errstate(divide="ignore"):
        w = np.where(dens > 0, 1.0 / np.where(dens > 0, dens, 1.0), np.inf)
    return np.minimum(w, clip)


def gai_batch(targets, preds, sigma: float, prior: GmmPrior):
    t, p = _check_pair(targets, preds)
    if prior.dim != t.shape[1]:
        raise ValueError(f"dimension mismatch: labels d={t.shape[1]}, prior d={prior.dim}")
    d = t.shape[1]
    var = sigma * sigma
    nll, g_nll, gs_nll = _nll_part(t, p, sigma)

    # log sum_i phi_i N(pred; mu_i, Sigma_i + sigma^2 I)
    inv, logdet = chol_inverse(cholesky(prior.covs + var * np.eye(d)))
    diff = p[:, None, :] - prior.means[None]                       # (n, K, d)
    solved = np.einsum("kij,nkj->nki", inv, diff)                   # C^-1 (p - mu)
    maha = np.einsum("nki,nki->nk", diff, solved)
    with np.errstate(divide="ignore"):
        logw = np.log(prior.weights)
    comp = logw[None] - 0.5 * (d * LOG_2PI + logdet[None] + maha)
    bal = logsumexp(comp, axis=1)
    resp = np.exp(comp - bal[:, None])

    grad_pred = g_nll - np.einsum("nk,nki->ni", resp, solved)
    # d/dlog(sigma) log N(p; mu, C) = sigma^2 (|C^-1 a|^2 - tr C^-1)
    trace = np.trace(inv, axis1=1, axis2=2)
    g_comp = var * (np.sum(solved * solved, axis=2) - trace[None])
    grad_ls = gs_nll + np.sum(resp * g_comp, axis=1)
    return nll + bal, grad_pred, grad_ls


def _sq_dists(p, labels):
    """(n, N) squared distances, accumulated one coordinate at a time."""
    sq = np.zeros((p.shape[0], labels.shape[0]))
    for k in range(p.shape[1]):
        diff = p[:, k, None] - labels[None, :, k]
        sq += diff * diff
    return sq


def _softmax_over_labels(t, p, sigma, labels, logw=None):
    """Shared by BMC and BNI: balancing term built from a finite label set.

    The Gaussian normalizers of the two terms cancel and are left out, and the
    target distance is accumulated exactly like the label distances. When the
    target dominates the softmax the loss then reduces to a clean log1p.
    """
    var = sigma * sigma
    sq_t = np.zeros(p.shape[0])
    for k in range(p.shape[1]):
        diff = p[:, k] - t[:, k]
        sq_t += diff * diff
    sq = _sq_dists(p, labels)
    logits = -sq / (2.0 * var)
    if logw is not None:
        logits = logits + logw[None]
    top, tail = logsumexp_parts(logits, axis=1)
    w = np.exp(logits - top[:, None] - tail[:, None])
    # the target term and the max cancel exactly when the target dominates
    value = (sq_t / (2.0 * var) + top) + tail
    grad_pred = (w @ labels - t) / var
    grad_ls = (np.sum(w * sq, axis=1) - sq_t) / var
    return value, grad_pred, grad_ls


def bmc_batch(targets, preds, sigma: float, batch_labels):
    """Batch-based Monte-Carlo: each target is classified among ``batch_labels``.

    Equal to ``-log softmax(-|pred - y'|^2 / tau)[target]`` with
    ``tau = 2 sigma^2``; the Gaussian normalizers cancel between the two terms.
    """
    t, p = _check_pair(targets, preds)
    labels = as_labels(batch_labels, "batch_labels")
    if labels.shape[0] < 2:
        raise ValueError("BMC needs a batch of at least 2 labels")
    if labels.shape[1] != t.shape[1]:
        raise ValueError("dimension mismatch between batch labels and targets")
    return _softmax_over_labels(t, p, sigma, labels)


def bni_batch(targets, preds, sigma: float, prior: BinnedPrior):
    t, p = _check_pair(targets, preds)
    if prior.dim != t.shape[1]:
        raise ValueError(f"dimension mismatch: labels d={t.shape[1]}, prior d={prior.dim}")
    keep = prior.densities > 0
    if not keep.any():
        raise ValueError("binned prior has no mass")
    # density times bin volume: a Riemann sum of the balancing integral
    logw = np.log(prior.densities[keep]) + np.log(prior.bin_volume)
    return _softmax_over_labels(t, p, sigma, prior.centers[keep], logw)


def balanced_softmax_batch(logits, targets, prior: DiscretePrior):
    """Cross-entropy of ``softmax(logits + log prior)``; returns (values, grad_logits)."""
    eta = np.atleast_2d(np.asarray(logits, dtype=float))
    t = np.atleast_1d(np.asarray(targets, dtype=int))
    if eta.shape[1] != prior.probs.size or eta.shape[1] < 2:
        raise ValueError(f"need {prior.probs.size} >= 2 logits per sample, got {eta.shape[1]}")
    if np.any(prior.probs[t] <= 0):
        raise ValueError("target class has zero prior mass")
    with np.errstate(divide="ignore"):
        adjusted = eta + np.log(prior.probs)[None]
    lse = logsumexp(adjusted, axis=1)
    rows = np.arange(eta.shape[0])
    value = lse - adjusted[rows, t]
    grad = np.exp(adjusted - lse[:, None])
    grad[rows, t] -= 1.0
    return value, grad


# ---------------------------------------------------------------------------
# per-sample API
# ---------------------------------------------------------------------------

def _pair(target, pred):
    t = as_label(target, "target")
    p = as_label(pred, "pred")
    if t.shape != p.shape:
        raise ValueError(f"dimension mismatch: target d={t.size}, pred d={p.size}")
    return t[None], p[None]


def _wrap(value, grad, gs, noise: NoiseScale | None = None) -> LossEval:
    learn = noise is not None and noise.learnable
    return LossEval(float(value[0]), grad[0], float(gs[0]) if learn else 0.0)


def mse_loss(target, pred) -> LossEval:
    return _wrap(*mse_batch(*_pair(target, pred)))


def reweighted_mse_loss(target, pred, prior_density_at_target: float,
                        clip: float = DEFAULT_CLIP) -> LossEval:
    w = inverse_frequency_weights([prior_density_at_target], clip)
    return _wrap(*reweighted_mse_batch(*_pair(target, pred), w))


def gai_loss(target, pred, sigma: NoiseScale, prior: GmmPrior) -> LossEval:
    """Closed-form Balanced MSE with a Gaussian-mixture prior."""
    return _wrap(*gai_batch(*_pair(target, pred), sigma.sigma, prior), sigma)


def bmc_loss(target, pred, sigma: NoiseScale, batch: BatchPrior) -> LossEval:
    t, p = _pair(target, pred)
    if not np.any(np.all(batch.labels == t, axis=1)):
        raise ValueError("BMC target must be one of the batch labels")
    return _wrap(*bmc_batch(t, p, sigma.sigma, batch.labels), sigma)


def bni_loss(target, pred, sigma: NoiseScale, prior: BinnedPrior) -> LossEval:
    return _wrap(*bni_batch(*_pair(target, pred), sigma.sigma, prior), sigma)


def balanced_softmax_nll(logits, target_class: int, prior: DiscretePrior) -> LossEval:
    value, grad = balanced_softmax_batch(np.asarray(logits, dtype=float)[None], [target_class], prior)
    return LossEval(float(value[0]), grad[0], 0.0)


def predict(g: IsotropicGaussian) -> np.ndarray:
    """Point prediction for a balanced test set: the mean of the predicted Gaussian."""
    return g.mean.copy()


def statistical_conversion(p_bal_given_x, p_train) -> np.ndarray:
    """Discrete conversion of a balanced posterior into the training posterior.

    ``p_bal_given_x`` has classes on the last axis; each row is reweighted by
    ``p_train`` and renormalized.
    """
    pb = np.asarray(p_bal_given_x, dtype=float)
    unnorm = pb * np.asarray(p_train, dtype=float)
    return unnorm / unnorm.sum(axis=-1, keepdims=True)
