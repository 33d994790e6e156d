"""Property suites that check the losses against independent oracles.

Each suite returns a list of :class:`CheckResult`. The oracles deliberately
avoid the code paths they check: finite differences for gradients, scipy
densities plus grid quadrature for the closed-form integral, brute-force
Bayes for the discrete conversion, and sampling for the batch estimate.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from .losses import (
    NoiseScale,
    balanced_softmax_nll,
    bmc_loss,
    bni_loss,
    gai_loss,
    mse_loss,
    reweighted_mse_loss,
    statistical_conversion,
)
from .numerics import finite_diff_grad
from .priors import BatchPrior, BinnedPrior, DiscretePrior, GmmPrior


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    max_error: float
    tolerance: float
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.suite}/{self.name}: max error {self.max_error:.3e} "
                f"(tolerance {self.tolerance:.0e}, {self.seconds:.2f}s)")


def random_gmm(rng, d: int, K: int, spread: float = 2.0) -> GmmPrior:
    """Mixture with covariance eigenvalues in [0.25, 4]."""
    means = rng.uniform(-spread, spread, (K, d))
    covs = []
    for _ in range(K):
        q, _ = np.linalg.qr(rng.normal(size=(d, d)))
        lam = np.exp(rng.uniform(np.log(0.25), np.log(4.0), d))
        c = (q * lam) @ q.T
        covs.append(0.5 * (c + c.T))
    return GmmPrior(rng.dirichlet(np.ones(K)), means, np.array(covs))


def random_binned(rng, d: int, n_per_dim: int = 12, half_width: float = 4.0) -> BinnedPrior:
    width = 2 * half_width / n_per_dim
    axis = -half_width + width * (np.arange(n_per_dim) + 0.5)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    dens = rng.uniform(0.05, 1.0, grid.shape[0])
    dens /= dens.sum() * width**d
    return BinnedPrior(grid, dens, np.full(d, width))


def _rel_err(analytic, numeric) -> float:
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-8)
    return float(np.linalg.norm(a - n) / scale)


def _check_sigma_loss(loss_fn, d, rng, step):
    """Finite-difference check over (pred, log sigma) jointly."""
    target = rng.normal(0, 1.5, d)
    pred = target + rng.normal(0, 1.0, d)
    log_sigma = np.log(rng.uniform(0.5, 2.0))

    def f(z):
        return loss_fn(target, z[:d], NoiseScale(z[d], True)).value

    z0 = np.append(pred, log_sigma)
    ev = loss_fn(target, pred, NoiseScale(log_sigma, True))
    analytic = np.append(ev.grad_pred, ev.grad_log_sigma)
    return _rel_err(analytic, finite_diff_grad(f, z0, step))


def suite_gradcheck(n_instances: int = 100, seed: int = 0, step: float = 1e-5,
                    tol: float = 1e-4) -> list:
    rng = np.random.default_rng(seed)
    dims, comps = (1, 2, 3), (1, 2, 4)
    errors = {k: [] for k in ("mse", "reweight", "gai", "bmc", "bni", "balanced_softmax")}
    times = dict.fromkeys(errors, 0.0)

    for i in range(n_instances):
        d = dims[i % 3]
        K = comps[(i // 3) % 3]

        t0 = time.perf_counter()
        target, pred = rng.normal(0, 2, d), rng.normal(0, 2, d)
        errors["mse"].append(_rel_err(mse_loss(target, pred).grad_pred,
                                      finite_diff_grad(lambda p: mse_loss(target, p).value, pred, step)))
        t1 = time.perf_counter()
        dens = rng.uniform(1e-3, 2.0)
        rw = lambda p: reweighted_mse_loss(target, p, dens).value
        errors["reweight"].append(_rel_err(reweighted_mse_loss(target, pred, dens).grad_pred,
                                           finite_diff_grad(rw, pred, step)))
        t2 = time.perf_counter()
        prior = random_gmm(rng, d, K)
        errors["gai"].append(_check_sigma_loss(lambda t, p, s: gai_loss(t, p, s, prior), d, rng, step))
        t3 = time.perf_counter()
        n_batch = int(rng.integers(2, 33))
        labels = rng.normal(0, 2, (n_batch, d))

        def bmc(t, p, s, labels=labels):
            batch = np.vstack([t, labels[1:]])
            return bmc_loss(t, p, s, BatchPrior(batch))

        errors["bmc"].append(_check_sigma_loss(bmc, d, rng, step))
        t4 = time.perf_counter()
        binned = random_binned(rng, d, n_per_dim=12 if d < 3 else 8)
        errors["bni"].append(_check_sigma_loss(lambda t, p, s: bni_loss(t, p, s, binned), d, rng, step))
        t5 = time.perf_counter()
        C = int(rng.integers(2, 9))
        cls_prior = DiscretePrior(tuple(range(C)), rng.dirichlet(np.ones(C)))
        logits = rng.normal(0, 2, C)
        target_class = int(rng.integers(C))
        bs = lambda eta: balanced_softmax_nll(eta, target_class, cls_prior).value
        errors["balanced_softmax"].append(
            _rel_err(balanced_softmax_nll(logits, target_class, cls_prior).grad_pred,
                     finite_diff_grad(bs, logits, step)))
        t6 = time.perf_counter()
        for k, dt in zip(errors, (t1 - t0, t2 - t1, t3 - t2, t4 - t3, t5 - t4, t6 - t5)):
            times[k] += dt

    return [CheckResult("gradcheck", k, max(v) < tol, max(v), tol, times[k]) for k, v in errors.items()]


def quadrature_balancing_term(pred, sigma: float, prior: GmmPrior, h: float = 0.08,
                              half_width: float = 10.0) -> float:
    """log of the integral of N(y; pred, sigma^2 I) p_train(y) by trapezoidal quadrature."""
    pred = np.atleast_1d(np.asarray(pred, dtype=float))
    d = pred.size
    axes = [np.arange(p - half_width * sigma, p + half_width * sigma + h, h) for p in pred]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    pts = grid.reshape(-1, d)
    dens = np.zeros(pts.shape[0])
    for w, m, c in zip(prior.weights, prior.means, prior.covs):
        dens += w * stats.multivariate_normal(m, c).pdf(pts).reshape(-1)
    f = (stats.multivariate_normal(pred, sigma**2 * np.eye(d)).pdf(pts).reshape(-1) * dens)
    f = f.reshape(grid.shape[:-1])
    for ax in reversed(axes):
        f = trapezoid(f, ax, axis=-1)
    return float(np.log(f))


def suite_quadrature(n_instances: int = 50, seed: int = 1, tol: float = 1e-6) -> list:
    rng = np.random.default_rng(seed)
    errs = []
    t0 = time.perf_counter()
    for i in range(n_instances):
        d = 1 + i % 2
        K = 1 + (i // 2) % 4
        prior = random_gmm(rng, d, K)
        sigma = rng.uniform(0.5, 1.5)
        pred = rng.uniform(-2, 2, d)
        target = pred + rng.normal(0, 1, d)
        nll = -stats.multivariate_normal(pred, sigma**2 * np.eye(d)).logpdf(target)
        oracle = nll + quadrature_balancing_term(pred, sigma, prior)
        errs.append(abs(gai_loss(target, pred, NoiseScale.from_sigma(sigma), prior).value - oracle))
    return [CheckResult("quadrature", "gai_vs_grid", max(errs) < tol, max(errs), tol,
                        time.perf_counter() - t0)]


def suite_theorem1(n_tables: int = 1000, seed: int = 2, tol: float = 1e-12) -> list:
    """Discrete conversion of p_bal(y|x) vs direct Bayes, on random tables."""
    rng = np.random.default_rng(seed)
    err_conv = err_ratio = 0.0
    t0 = time.perf_counter()
    for _ in range(n_tables):
        C = int(rng.integers(2, 9))
        M = int(rng.integers(2, 11))
        p_x_given_y = rng.dirichlet(np.ones(M), size=C).T           # (M, C), columns sum to 1
        p_train = rng.dirichlet(np.ones(C))
        p_bal = np.full(C, 1.0 / C)

        joint_train = p_x_given_y * p_train
        direct = joint_train / joint_train.sum(axis=1, keepdims=True)
        joint_bal = p_x_given_y * p_bal
        p_bal_given_x = joint_bal / joint_bal.sum(axis=1, keepdims=True)

        converted = statistical_conversion(p_bal_given_x, p_train)
        err_conv = max(err_conv, float(np.max(np.abs(converted - direct))))

        # change of variables with the explicit evidence ratio p_bal(x) / p_train(x)
        evidence = joint_bal.sum(axis=1) / joint_train.sum(axis=1)
        via_ratio = p_bal_given_x * (p_train / p_bal) * evidence[:, None]
        err_ratio = max(err_ratio, float(np.max(np.abs(via_ratio - direct))))
    dt = time.perf_counter() - t0
    return [CheckResult("theorem1", "conversion_vs_bayes", err_conv < tol, err_conv, tol, dt),
            CheckResult("theorem1", "evidence_ratio_vs_bayes", err_ratio < tol, err_ratio, tol, dt)]


def suite_bmc_convergence(n_samples: int = 100_000, seed: int = 3, tol: float = 1e-2) -> list:
    """Batch estimate of the balancing integral vs its closed form."""
    rng = np.random.default_rng(seed)
    out = []
    for d in (1, 2):
        t0 = time.perf_counter()
        prior = random_gmm(rng, d, 3)
        sigma = 1.0
        pred = rng.uniform(-1, 1, d)
        labels = prior.sample(n_samples, rng)
        sq = np.sum((labels - pred) ** 2, axis=1)
        estimate = np.mean(np.exp(-sq / (2 * sigma**2)) / (2 * np.pi * sigma**2) ** (d / 2))
        analytic = float(np.exp(prior.component_log_densities(pred[None], sigma**2)[0]) @ prior.weights)
        rel = abs(estimate - analytic) / analytic
        out.append(CheckResult("bmc-convergence", f"integral_d{d}", rel < tol, rel,
                               tol, time.perf_counter() - t0))

        t0 = time.perf_counter()
        target = labels[0]
        noise = NoiseScale.from_sigma(sigma)
        bmc = bmc_loss(target, pred, noise, BatchPrior(labels)).value - np.log(n_samples)
        gai = gai_loss(target, pred, noise, prior).value
        out.append(CheckResult("bmc-convergence", f"loss_d{d}", abs(bmc - gai) < tol,
                               abs(bmc - gai), tol, time.perf_counter() - t0))
    return out


def suite_uniform_prior(n_points: int = 50, seed: int = 4, tol: float = 1e-3) -> list:
    """BNI under uniform densities reproduces the plain Gaussian NLL gradient."""
    rng = np.random.default_rng(seed)
    sigma = 1.0
    width = 0.1
    half = 10.0 * sigma
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(n_points):
        pred = rng.uniform(-3, 3)
        target = pred + rng.choice([-1, 1]) * rng.uniform(0.5, 3.0)
        centers = np.arange(pred - half, pred + half + width / 2, width)
        prior = BinnedPrior(centers[:, None], np.full(centers.size, 1.0 / (centers.size * width)),
                            [width])
        g = bni_loss(target, pred, NoiseScale.from_sigma(sigma), prior).grad_pred[0]
        ref = (pred - target) / sigma**2
        worst = max(worst, abs(g - ref) / abs(ref))
    return [CheckResult("uniform-prior", "bni_vs_nll_gradient", worst < tol, worst, tol,
                        time.perf_counter() - t0)]


SUITES = {
    "gradcheck": suite_gradcheck,
    "quadrature": suite_quadrature,
    "theorem1": suite_theorem1,
    "bmc-convergence": suite_bmc_convergence,
    "uniform-prior": suite_uniform_prior,
}


def run_suite(name: str) -> list:
    if name == "all":
        return [r for suite in SUITES.values() for r in suite()]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name]()
