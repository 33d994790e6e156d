"""SGD with momentum and Adam, as pure functions over lists of arrays."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SGD:
    lr: float = 1e-3
    momentum: float = 0.9

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")


@dataclass(frozen=True)
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")


def init_state(spec, params) -> dict:
    zeros = [np.zeros_like(p, dtype=float) for p in params]
    if isinstance(spec, SGD):
        return {"velocity": zeros}
    if isinstance(spec, Adam):
        return {"t": 0, "m": zeros, "v": [z.copy() for z in zeros]}
    raise TypeError(f"unknown optimizer {spec!r}")


def optimizer_step(params, grads, state, spec):
    """Return ``(new_params, new_state)``; inputs are left untouched.

    SGD follows ``v <- momentum * v + g``, ``p <- p - lr * v``.
    Adam uses the bias-corrected moment estimates.
    """
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise ValueError(f"shape mismatch {np.shape(p)} vs {np.shape(g)}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")

    if isinstance(spec, SGD):
        vel = [spec.momentum * v + g for v, g in zip(state["velocity"], grads)]
        new = [p - spec.lr * v for p, v in zip(params, vel)]
        return new, {"velocity": vel}

    if isinstance(spec, Adam):
        t = state["t"] + 1
        m = [spec.beta1 * m_ + (1 - spec.beta1) * g for m_, g in zip(state["m"], grads)]
        v = [spec.beta2 * v_ + (1 - spec.beta2) * g * g for v_, g in zip(state["v"], grads)]
        c1 = 1 - spec.beta1**t
        c2 = 1 - spec.beta2**t
        new = [p - spec.lr * (m_ / c1) / (np.sqrt(v_ / c2) + spec.eps)
               for p, m_, v_ in zip(params, m, v)]
        return new, {"t": t, "m": m, "v": v}

    raise TypeError(f"unknown optimizer {spec!r}")
