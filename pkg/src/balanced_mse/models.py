"""Small numpy regressors with hand-written backprop."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import NoiseScale


@dataclass
class ModelParams:
    """Affine layers ``(W_i, b_i)`` with tanh between them, plus the noise scale.

    ``W_i`` has shape (out, in), so a linear model maps ``x -> W x + b``.
    """

    kind: str
    weights: list
    biases: list
    noise: NoiseScale = field(default_factory=NoiseScale)

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        if self.kind == "linear" and len(self.weights) != 1:
            raise ValueError("a linear model has exactly one layer")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list:
        """Trainable arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def with_arrays(self, arrays) -> "ModelParams":
        return ModelParams(self.kind, list(arrays[0::2]), list(arrays[1::2]), self.noise)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays()) and np.isfinite(self.noise.log_sigma)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "log_sigma": self.noise.log_sigma,
            "sigma_learnable": self.noise.learnable,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        return cls(
            doc["kind"],
            [np.asarray(w, dtype=float) for w in doc["weights"]],
            [np.asarray(b, dtype=float) for b in doc["biases"]],
            NoiseScale(float(doc.get("log_sigma", 0.0)), bool(doc.get("sigma_learnable", True))),
        )


def _layer(rng, fan_in, fan_out):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, (fan_out, fan_in)), rng.uniform(-bound, bound, fan_out)


def init_linear(in_dim: int, out_dim: int, rng: np.random.Generator,
                noise: NoiseScale | None = None) -> ModelParams:
    W, b = _layer(rng, in_dim, out_dim)
    return ModelParams("linear", [W], [b], noise or NoiseScale())


def init_mlp(in_dim: int, out_dim: int, rng: np.random.Generator, hidden=(64, 64),
             noise: NoiseScale | None = None) -> ModelParams:
    sizes = [in_dim, *hidden, out_dim]
    Ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W, b = _layer(rng, fan_in, fan_out)
        Ws.append(W)
        bs.append(b)
    return ModelParams("mlp", Ws, bs, noise or NoiseScale())


def forward(model: ModelParams, x) -> np.ndarray:
    """Predictions for a single input vector or an (n, m) batch."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    X = arr.reshape(1, -1) if single else arr
    if X.shape[1] != model.in_dim:
        raise ValueError(f"input has dimension {X.shape[1]}, model expects {model.in_dim}")
    out, _ = forward_cached(model, X)
    return out[0] if single else out


def forward_cached(model: ModelParams, X: np.ndarray):
    """Batch forward pass that also returns the activations backprop needs."""
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ W.T + b
        if i < last:
            h = np.tanh(h)
        acts.append(h)
    return h, acts


def backward(model: ModelParams, acts, grad_out: np.ndarray) -> list:
    """Gradients of ``sum(grad_out * output)`` in the order of ``model.arrays()``."""
    grads = []
    g = grad_out
    for i in range(len(model.weights) - 1, -1, -1):
        h_in = acts[i]
        grads.append(g.sum(axis=0))      # bias
        grads.append(g.T @ h_in)         # weight
        if i > 0:
            g = (g @ model.weights[i]) * (1.0 - h_in * h_in)
    grads.reverse()
    return grads
