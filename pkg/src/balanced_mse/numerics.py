"""Gaussian log-densities, log-sum-exp and a finite-difference gradient checker.

Every density here is evaluated in log space; callers exponentiate only at
the very end, if at all.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_triangular

LOG_2PI = float(np.log(2.0 * np.pi))

# Jitter ladder tried when a covariance fails to factorize.
_JITTERS = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


def as_label(values, name: str = "label") -> np.ndarray:
    """Coerce ``values`` to a finite 1-D float array."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_labels(values, name: str = "labels") -> np.ndarray:
    """Coerce to an (n, d) float array; a flat sequence is read as n labels of d=1."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_cov(cov, d: int | None = None) -> np.ndarray:
    """Validate a covariance matrix (scalars are accepted for d=1)."""
    c = np.asarray(cov, dtype=float)
    if c.ndim == 0:
        c = c.reshape(1, 1)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"covariance must be square, got shape {c.shape}")
    if d is not None and c.shape[0] != d:
        raise ValueError(f"covariance is {c.shape[0]}x{c.shape[0]}, expected {d}x{d}")
    if not np.all(np.isfinite(c)):
        raise ValueError("covariance contains non-finite entries")
    if np.max(np.abs(c - c.T)) > 1e-10:
        raise ValueError("covariance is not symmetric")
    return c


@dataclass(frozen=True)
class IsotropicGaussian:
    """N(mean, sigma^2 I); ``mean`` holds a prediction, ``sigma`` the noise scale."""

    mean: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "mean", as_label(self.mean, "mean"))
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def log_gaussian_iso(point, g: IsotropicGaussian) -> float:
    p = as_label(point, "point")
    if p.shape != g.mean.shape:
        raise ValueError(f"dimension mismatch: point has d={p.shape[0]}, mean has d={g.dim}")
    d = g.dim
    sq = float(np.sum((p - g.mean) ** 2))
    return -0.5 * d * LOG_2PI - d * np.log(g.sigma) - sq / (2.0 * g.sigma**2)


def cholesky(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Works on a single (d, d) matrix or a stack (..., d, d).
    """
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(cov.shape[-1])
    for jitter in _JITTERS:
        try:
            return np.linalg.cholesky(cov + jitter * eye)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        f"covariance not positive definite even with jitter {_JITTERS[-1]:g}"
    )


def log_gaussian_full(point, mean, cov) -> float:
    p = as_label(point, "point")
    m = as_label(mean, "mean")
    if p.shape != m.shape:
        raise ValueError(f"dimension mismatch: point d={p.shape[0]}, mean d={m.shape[0]}")
    c = as_cov(cov, p.shape[0])
    L = cholesky(c)
    z = solve_triangular(L, p - m, lower=True)
    d = p.shape[0]
    return float(-0.5 * d * LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * z @ z)


def chol_inverse(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse and log-determinant of ``L @ L.T`` for a stack of lower factors."""
    Linv = np.linalg.inv(L)
    inv = np.swapaxes(Linv, -1, -2) @ Linv
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return inv, logdet


def logsumexp_parts(a: np.ndarray, axis: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Split log-sum-exp into ``(max, log1p(sum of the other terms' ratios))``.

    Keeping the two parts apart lets a caller cancel the max against another
    term before the small tail is rounded away. All ``-inf`` slices give a
    ``-inf`` max and a zero tail.
    """
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    empty = ~np.isfinite(m)
    shift = np.where(empty, 0.0, m)
    e = np.exp(a - shift)
    np.put_along_axis(e, np.expand_dims(np.argmax(a, axis=axis), axis), 0.0, axis=axis)
    tail = np.log1p(np.sum(e, axis=axis, keepdims=True))
    return np.squeeze(m, axis=axis), np.squeeze(np.where(empty, 0.0, tail), axis=axis)


def logsumexp(a: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shifted log-sum-exp along ``axis``; all ``-inf`` slices give ``-inf``."""
    m, tail = logsumexp_parts(a, axis)
    return m + tail


def log_sum_exp(terms) -> float:
    t = np.asarray(terms, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("log_sum_exp of an empty sequence")
    if not np.any(np.isfinite(t)):
        raise ValueError("log_sum_exp needs at least one finite term")
    return float(logsumexp(t))


def finite_diff_grad(f: Callable[[np.ndarray], float], at, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    if not 0 < step <= 1e-2:
        raise ValueError(f"step must lie in (0, 1e-2], got {step}")
    x = np.atleast_1d(np.asarray(at, dtype=float)).copy()
    grad = np.empty_like(x)
    for i in range(x.size):
        orig = x[i]
        x[i] = orig + step
        hi = f(x.copy())
        x[i] = orig - step
        lo = f(x.copy())
        x[i] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"non-finite function value while differencing component {i}")
        grad[i] = (hi - lo) / (2.0 * step)
    return grad
