"""Synthetic imbalanced regression datasets.

Training labels are drawn from a skewed distribution, unit Gaussian noise is
subtracted to obtain noiseless labels, and inputs come from inverting the
oracle relation. Test sets use an even label grid and no noise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

SKEW_LEVELS = ("low", "moderate", "high")

# Skew-level constants (the values themselves are free choices of this harness).
NORMAL_STD = {"low": 2.0, "moderate": 1.0, "high": 0.5}
EXPONENTIAL_RATE = {"low": 0.5, "moderate": 1.0, "high": 2.0}
MVN_VAR = {"low": 2.0, "moderate": 1.0, "high": 0.5}


@dataclass
class OracleFn:
    """Strictly increasing map from inputs to noiseless labels, applied per dimension.

    kinds and their parameters:
      linear           y = a x + b
      sinusoid         y = x + amp sin(freq x) / freq            (|amp| < 1)
      cubic            y = x + c x^3                             (c >= 0)
      logistic         y = slope x + amp tanh(x / scale)
      piecewise_linear continuous, slopes[i] on the i-th interval split by knots
    """

    kind: str = "linear"
    params: dict = field(default_factory=dict)

    _DEFAULTS = {
        "linear": {"a": 1.0, "b": 0.0},
        "sinusoid": {"amp": 0.8, "freq": 1.0},
        "cubic": {"c": 0.05},
        "logistic": {"slope": 0.3, "amp": 3.0, "scale": 1.0},
        "piecewise_linear": {"knots": [-1.0, 2.0], "slopes": [0.5, 2.0, 0.8]},
    }

    def __post_init__(self):
        if self.kind not in self._DEFAULTS:
            raise ValueError(f"unknown oracle kind {self.kind!r}")
        self.params = {**self._DEFAULTS[self.kind], **(self.params or {})}
        p = self.params
        if self.kind == "linear" and p["a"] == 0:
            raise ValueError("linear oracle with a=0 is not invertible")
        if self.kind == "sinusoid" and not (abs(p["amp"]) < 1 and p["freq"] > 0):
            raise ValueError("sinusoid oracle needs |amp| < 1 and freq > 0")
        if self.kind == "cubic" and p["c"] < 0:
            raise ValueError("cubic oracle needs c >= 0")
        if self.kind == "logistic" and not (p["slope"] > 0 and p["amp"] >= 0 and p["scale"] > 0):
            raise ValueError("logistic oracle needs slope > 0, amp >= 0, scale > 0")
        if self.kind == "piecewise_linear":
            knots, slopes = np.asarray(p["knots"], float), np.asarray(p["slopes"], float)
            if slopes.size != knots.size + 1 or np.any(slopes <= 0) or np.any(np.diff(knots) <= 0):
                raise ValueError("piecewise_linear needs sorted knots and len(knots)+1 positive slopes")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "linear":
            return p["a"] * x + p["b"]
        if self.kind == "sinusoid":
            return x + p["amp"] * np.sin(p["freq"] * x) / p["freq"]
        if self.kind == "cubic":
            return x + p["c"] * x**3
        if self.kind == "logistic":
            return p["slope"] * x + p["amp"] * np.tanh(x / p["scale"])
        knots, slopes = np.asarray(p["knots"], float), np.asarray(p["slopes"], float)
        # anchor: f(knots[0]) = knots[0]
        out = knots[0] + slopes[0] * np.minimum(x - knots[0], 0.0)
        for i in range(knots.size):
            right = knots[i + 1] if i + 1 < knots.size else np.inf
            out = out + slopes[i + 1] * np.clip(x - knots[i], 0.0, right - knots[i])
        return out

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "linear":
            return (y - self.params["b"]) / self.params["a"]
        # bracket then bisect; every oracle is strictly increasing on R
        lo = np.full_like(y, -1.0)
        hi = np.full_like(y, 1.0)
        for _ in range(200):
            bad = self(lo) > y
            if not bad.any():
                break
            lo = np.where(bad, 2.0 * lo, lo)
        for _ in range(200):
            bad = self(hi) < y
            if not bad.any():
                break
            hi = np.where(bad, 2.0 * hi, hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            below = self(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
                break
        return 0.5 * (lo + hi)

    def check_invertible(self, low, high, margin: float = 8.0):
        grid = np.linspace(np.min(low) - margin, np.max(high) + margin, 4001)
        if np.any(np.diff(self(grid)) <= 0):
            raise ValueError(f"oracle {self.kind} is not invertible on the label range")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, doc: dict) -> "OracleFn":
        doc = dict(doc)
        return cls(doc.pop("kind", "linear"), doc)


@dataclass
class LabelDistSpec:
    """Skewed training label distribution, truncated to ``range`` by rejection.

    kinds: ``normal`` (mean, std), ``exponential`` (rate, offset),
    ``mvn`` (mean vector, cov matrix).
    """

    kind: str
    params: dict
    range: tuple
    skew: str | None = None

    def __post_init__(self):
        if self.kind not in ("normal", "exponential", "mvn"):
            raise ValueError(f"unknown label distribution {self.kind!r}")
        p = self.params
        if self.kind == "normal" and not p["std"] > 0:
            raise ValueError("std must be positive")
        if self.kind == "exponential" and not p["rate"] > 0:
            raise ValueError("rate must be positive")
        if self.kind == "mvn":
            cov = np.asarray(p["cov"], dtype=float)
            np.linalg.cholesky(cov)
        b = np.asarray(self.range, dtype=float)
        if b.ndim == 1:
            b = b[None]
        if b.shape != (self.dim, 2) or np.any(b[:, 1] <= b[:, 0]):
            raise ValueError(f"range must be (low, high) per dimension, got {self.range}")
        self.range = tuple(map(tuple, b.tolist())) if self.dim > 1 else tuple(b[0].tolist())

    @property
    def dim(self) -> int:
        return len(self.params["mean"]) if self.kind == "mvn" else 1

    @property
    def bounds(self) -> np.ndarray:
        return np.asarray(self.range, dtype=float).reshape(self.dim, 2)

    @property
    def name(self) -> str:
        return {"normal": "Normal", "exponential": "Exponential", "mvn": "MVN"}[self.kind]

    def _raw_sample(self, n, rng):
        p = self.params
        if self.kind == "normal":
            return rng.normal(p["mean"], p["std"], (n, 1))
        if self.kind == "exponential":
            return p.get("offset", 0.0) + rng.exponential(1.0 / p["rate"], (n, 1))
        return rng.multivariate_normal(np.asarray(p["mean"], float), np.asarray(p["cov"], float), n)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        b = self.bounds
        out = []
        got = 0
        while got < n:
            draw = self._raw_sample(max(2 * (n - got), 64), rng)
            ok = np.all((draw >= b[:, 0]) & (draw <= b[:, 1]), axis=1)
            out.append(draw[ok])
            got += int(ok.sum())
        return np.concatenate(out)[:n]

    def _frozen_1d(self):
        p = self.params
        if self.kind == "normal":
            return stats.norm(p["mean"], p["std"])
        return stats.expon(p.get("offset", 0.0), 1.0 / p["rate"])

    def density(self, points) -> np.ndarray:
        """Density of the truncated distribution."""
        y = np.asarray(points, dtype=float).reshape(-1, self.dim)
        b = self.bounds
        inside = np.all((y >= b[:, 0]) & (y <= b[:, 1]), axis=1)
        if self.kind == "mvn":
            mvn = stats.multivariate_normal(self.params["mean"], self.params["cov"])
            mass = mvn.cdf(b[:, 1], lower_limit=b[:, 0])
            dens = mvn.pdf(y).reshape(-1) / mass
        else:
            dist = self._frozen_1d()
            mass = dist.cdf(b[0, 1]) - dist.cdf(b[0, 0])
            dens = dist.pdf(y[:, 0]) / mass
        return np.where(inside, dens, 0.0)

    def truncated_moments(self):
        """Mean and std of the truncated 1-D distribution."""
        if self.kind == "mvn":
            raise NotImplementedError("moments are only provided for 1-D distributions")
        lo, hi = self.bounds[0]
        p = self.params
        if self.kind == "normal":
            a, b = (lo - p["mean"]) / p["std"], (hi - p["mean"]) / p["std"]
            d = stats.truncnorm(a, b, loc=p["mean"], scale=p["std"])
        else:
            off, scale = p.get("offset", 0.0), 1.0 / p["rate"]
            d = stats.truncexpon((hi - max(lo, off)) / scale, loc=max(lo, off), scale=scale)
        return float(d.mean()), float(d.std())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "range": self.range, "skew": self.skew}

    @classmethod
    def from_dict(cls, doc: dict) -> "LabelDistSpec":
        return cls(doc["kind"], dict(doc["params"]), doc["range"], doc.get("skew"))


def label_dist(kind: str, skew: str) -> LabelDistSpec:
    """The harness's preset distribution for ``kind`` at a skew level."""
    skew = skew.lower()
    if skew == "mod":
        skew = "moderate"
    if skew not in SKEW_LEVELS:
        raise ValueError(f"unknown skew level {skew!r}")
    kind = kind.lower()
    if kind == "normal":
        return LabelDistSpec("normal", {"mean": 0.0, "std": NORMAL_STD[skew]}, (-5.0, 5.0), skew)
    if kind == "exponential":
        return LabelDistSpec("exponential", {"rate": EXPONENTIAL_RATE[skew], "offset": 0.0},
                             (0.0, 10.0), skew)
    if kind == "mvn":
        v = MVN_VAR[skew]
        return LabelDistSpec("mvn", {"mean": [0.0, 0.0], "cov": [[v, 0.0], [0.0, v]]},
                             ((-5.0, 5.0), (-5.0, 5.0)), skew)
    raise ValueError(f"unknown distribution {kind!r}")


@dataclass
class SyntheticDataset:
    x: np.ndarray
    y: np.ndarray
    eps: np.ndarray
    oracle: OracleFn
    seed: int
    split: str
    spec: LabelDistSpec | None = None

    def __len__(self):
        return self.x.shape[0]

    def to_csv(self, path):
        m, d = self.x.shape[1], self.y.shape[1]
        header = [f"x_{i}" for i in range(m)] + [f"y_{i}" for i in range(d)] + [f"eps_{i}" for i in range(d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in np.hstack([self.x, self.y, self.eps]):
                w.writerow([repr(float(v)) for v in row])

    def sidecar(self) -> dict:
        return {
            "split": self.split,
            "seed": self.seed,
            "n": len(self),
            "oracle": self.oracle.to_dict(),
            "label_dist": self.spec.to_dict() if self.spec is not None else None,
        }

    @classmethod
    def from_csv(cls, path, sidecar: dict) -> "SyntheticDataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
        cols = lambda prefix: [i for i, h in enumerate(header) if h.startswith(prefix)]
        spec = sidecar.get("label_dist")
        return cls(data[:, cols("x_")], data[:, cols("y_")], data[:, cols("eps_")],
                   OracleFn.from_dict(sidecar["oracle"]), sidecar["seed"], sidecar["split"],
                   LabelDistSpec.from_dict(spec) if spec else None)


def generate(spec: LabelDistSpec, oracle: OracleFn, n: int = 1024, seed: int = 0,
             split: str = "train", noise_scale: float = 1.0) -> SyntheticDataset:
    """Build a train or test set.

    train: y ~ spec, eps ~ N(0, noise_scale^2 I), x = f^-1(y - eps).
    test:  y on an even grid with ``n`` points per dimension, eps = 0, x = f^-1(y).
    """
    if n < 1:
        raise ValueError("n must be positive")
    b = spec.bounds
    oracle.check_invertible(b[:, 0], b[:, 1])
    rng = np.random.default_rng(seed)
    if split == "train":
        y = spec.sample(n, rng)
        eps = noise_scale * rng.standard_normal(y.shape)
        x = oracle.inverse(y - eps)
    elif split == "test":
        axes = [np.linspace(lo, hi, n) for lo, hi in b]
        y = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
        eps = np.zeros_like(y)
        x = oracle.inverse(y)
    else:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    return SyntheticDataset(x, y, eps, oracle, seed, split, spec)
