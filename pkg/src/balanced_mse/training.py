"""Deterministic minibatch training with optional joint noise-scale learning."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .losses import (
    DEFAULT_CLIP,
    LossKind,
    NoiseScale,
    bmc_batch,
    bni_batch,
    gai_batch,
    inverse_frequency_weights,
    mse_batch,
    reweighted_mse_batch,
)
from .models import ModelParams, backward, forward_cached, init_linear, init_mlp
from .optim import SGD, Adam, init_state, optimizer_step
from .priors import BinnedPrior, GmmPrior

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind = LossKind.MSE
    optimizer: SGD | Adam = field(default_factory=SGD)
    epochs: int = 2000
    batch_size: int = 256
    seed: int = 0
    sigma: float = 1.0
    learn_sigma: bool = False
    model: str = "linear"
    hidden: tuple = (64, 64)
    reweight_clip: float = DEFAULT_CLIP

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.loss is LossKind.BALANCED_SOFTMAX:
            raise ValueError("balanced softmax is a classification loss; it cannot train a regressor")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.loss is LossKind.BMC and self.batch_size < 2:
            raise ValueError("BMC needs batch_size >= 2")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass
class TrainingTrace:
    epochs: list = field(default_factory=list)
    mean_loss: list = field(default_factory=list)
    sigma: list = field(default_factory=list)

    def append(self, epoch, loss, sigma):
        self.epochs.append(epoch)
        self.mean_loss.append(loss)
        self.sigma.append(sigma)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "mean_loss", "sigma"])
            for row in zip(self.epochs, self.mean_loss, self.sigma):
                w.writerow([row[0], repr(float(row[1])), repr(float(row[2]))])


def init_model(config: TrainConfig, in_dim: int, out_dim: int, rng) -> ModelParams:
    noise = NoiseScale.from_sigma(config.sigma, learnable=config.learn_sigma)
    if config.model == "linear":
        return init_linear(in_dim, out_dim, rng, noise)
    if config.model == "mlp":
        return init_mlp(in_dim, out_dim, rng, tuple(config.hidden), noise)
    raise ValueError(f"unknown model {config.model!r}")


def _check_prior(kind: LossKind, prior):
    if kind is LossKind.GAI and not isinstance(prior, GmmPrior):
        raise TypeError("GAI needs a GmmPrior")
    if kind is LossKind.BNI and not isinstance(prior, BinnedPrior):
        raise TypeError("BNI needs a BinnedPrior")
    if kind is LossKind.REWEIGHT and not hasattr(prior, "density"):
        raise TypeError("reweighting needs a prior with a density() method")


def train(dataset, config: TrainConfig, prior=None, model: ModelParams | None = None):
    """Fit a regressor to ``dataset.x``/``dataset.y``; returns ``(model, trace)``.

    Batches come from a seeded permutation each epoch and every loss is
    averaged over the batch. For BMC the batch's own labels act as the prior.
    Reweighting uses ``min(1/density, clip)`` normalized to mean 1 per batch.
    """
    X = np.asarray(dataset.x, dtype=float)
    Y = np.asarray(dataset.y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    n = X.shape[0]
    if n == 0 or Y.shape[0] != n:
        raise ValueError("dataset must be nonempty with one label per input")
    kind = config.loss
    _check_prior(kind, prior)

    rng = np.random.default_rng(config.seed)
    if model is None:
        model = init_model(config, X.shape[1], Y.shape[1], rng)
    noise = model.noise
    arrays = model.arrays() + [np.array(noise.log_sigma)]
    state = init_state(config.optimizer, arrays)
    learn = config.learn_sigma and kind.uses_sigma

    weights = None
    if kind is LossKind.REWEIGHT:
        weights = inverse_frequency_weights(prior.density(Y), config.reweight_clip)

    trace = TrainingTrace()
    bs = config.batch_size
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        total, count = 0.0, 0
        for b, start in enumerate(range(0, n, bs)):
            idx = perm[start:start + bs]
            if kind is LossKind.BMC and idx.size < 2:
                continue
            xb, yb = X[idx], Y[idx]
            pred, acts = forward_cached(model, xb)
            sigma = float(np.exp(arrays[-1]))
            if kind is LossKind.MSE:
                vals, gp, gs = mse_batch(yb, pred)
            elif kind is LossKind.REWEIGHT:
                w = weights[idx]
                vals, gp, gs = reweighted_mse_batch(yb, pred, w / w.mean())
            elif kind is LossKind.GAI:
                vals, gp, gs = gai_batch(yb, pred, sigma, prior)
            elif kind is LossKind.BMC:
                vals, gp, gs = bmc_batch(yb, pred, sigma, yb)
            else:
                vals, gp, gs = bni_batch(yb, pred, sigma, prior)
            m = idx.size
            grads = backward(model, acts, gp / m)
            grads.append(np.array(gs.mean() if learn else 0.0))
            batch_loss = float(vals.mean())
            if not (np.isfinite(batch_loss) and all(np.all(np.isfinite(g)) for g in grads)):
                raise TrainingError(f"non-finite loss or gradient at epoch {epoch}, batch {b}")
            arrays, state = optimizer_step(arrays, grads, state, config.optimizer)
            model = model.with_arrays(arrays[:-1])
            total += batch_loss * m
            count += m
        noise = NoiseScale(float(arrays[-1]), config.learn_sigma)
        model.noise = noise
        if not model.all_finite():
            raise TrainingError(f"non-finite parameters after epoch {epoch}")
        trace.append(epoch, total / max(count, 1), noise.sigma)
    log.debug("trained %s/%s for %d epochs, final loss %.6g, sigma %.4g",
              config.model, kind.value, config.epochs, trace.mean_loss[-1], noise.sigma)
    return model, trace
