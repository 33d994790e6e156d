"""Balanced MSE losses for imbalanced regression, with a synthetic benchmark harness."""
from .losses import (
    LossEval,
    LossKind,
    NoiseScale,
    balanced_softmax_nll,
    bmc_loss,
    bni_loss,
    gai_loss,
    mse_loss,
    predict,
    reweighted_mse_loss,
    statistical_conversion,
)
from .models import ModelParams, forward
from .numerics import (
    IsotropicGaussian,
    finite_diff_grad,
    log_gaussian_full,
    log_gaussian_iso,
    log_sum_exp,
)
from .optim import SGD, Adam, optimizer_step
from .priors import (
    BatchPrior,
    BinnedPrior,
    DiscretePrior,
    GmmPrior,
    fit_binned,
    fit_gmm,
    gmm_log_density,
    prior_from_json,
    prior_to_json,
)
from .training import TrainConfig, TrainingError, TrainingTrace, train

__version__ = "0.1.0"

__all__ = [
    "LossEval", "LossKind", "NoiseScale", "balanced_softmax_nll", "bmc_loss", "bni_loss",
    "gai_loss", "mse_loss", "predict", "reweighted_mse_loss", "statistical_conversion",
    "ModelParams", "forward",
    "IsotropicGaussian", "finite_diff_grad", "log_gaussian_full", "log_gaussian_iso", "log_sum_exp",
    "SGD", "Adam", "optimizer_step",
    "BatchPrior", "BinnedPrior", "DiscretePrior", "GmmPrior", "fit_binned", "fit_gmm",
    "gmm_log_density", "prior_from_json", "prior_to_json",
    "TrainConfig", "TrainingError", "TrainingTrace", "train",
]
