"""
Balanced MSE losses on a single prediction
==========================================

Every loss returns a ``LossEval`` with the value, the gradient with respect to
the prediction and, for the balanced variants, the gradient with respect to
log sigma. This script evaluates them on a one-dimensional toy where the
training labels pile up near zero.
"""
import numpy as np

from balanced_mse import (
    BatchPrior,
    GmmPrior,
    NoiseScale,
    bmc_loss,
    fit_binned,
    gai_loss,
    mse_loss,
    reweighted_mse_loss,
)
from balanced_mse.losses import bni_loss

# A skewed prior: most labels sit near 0, a thin component sits at 4.
prior = GmmPrior(weights=[0.9, 0.1], means=[[0.0], [4.0]], covs=[[[0.25]], [[1.0]]])
sigma = NoiseScale.from_sigma(1.0, learnable=True)

target, pred = 3.0, 2.0

# Plain MSE pulls the prediction straight to the target.
print("mse        ", mse_loss(target, pred))

# Inverse-frequency reweighting scales that pull by 1 / p_train(target).
density = prior.density([[target]])[0]
print("reweight   ", reweighted_mse_loss(target, pred, density))

# GAI adds a balancing term: the log of the prior smoothed by the noise
# kernel, evaluated at the prediction. A prediction drifting towards the
# crowded region around 0 now costs more.
for p in (0.5, 2.0, 3.0):
    ev = gai_loss(target, p, sigma, prior)
    print(f"gai  pred={p:3.1f} value={ev.value:8.4f} dL/dpred={ev.grad_pred[0]:8.4f}"
          f" dL/dlog_sigma={ev.grad_log_sigma:8.4f}")

# BMC replaces the prior with the labels of the current batch: the target
# is classified against every label in the batch.
rng = np.random.default_rng(0)
batch = np.concatenate([[target], rng.normal(0.0, 0.5, 63)])
print("bmc        ", bmc_loss(target, pred, sigma, BatchPrior(batch[:, None])))

# BNI integrates numerically over a binned density estimate.
labels = np.concatenate([rng.normal(0, 0.5, 900), rng.normal(4, 1, 100)])
binned = fit_binned(labels, 100, (-5, 10))
print("bni        ", bni_loss(target, pred, sigma, binned))
