"""Method-by-distribution sweeps over seeds."""
from __future__ import annotations

import csv
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..losses import LossKind
from ..models import forward
from ..optim import SGD, Adam
from ..priors import fit_binned, fit_gmm
from ..training import TrainConfig, train
from .datasets import OracleFn, generate, label_dist
from .metrics import RegionSpec, eval_model

log = logging.getLogger(__name__)

# method name -> (loss, learn sigma)
METHODS = {
    "vanilla": (LossKind.MSE, False),
    "reweight": (LossKind.REWEIGHT, False),
    "gai_true": (LossKind.GAI, False),
    "bmc_true": (LossKind.BMC, False),
    "bni_true": (LossKind.BNI, False),
    "gai": (LossKind.GAI, True),
    "bmc": (LossKind.BMC, True),
    "bni": (LossKind.BNI, True),
}

TABLE_METHODS = ("vanilla", "reweight", "gai_true", "bmc_true", "gai", "bmc")
DISTRIBUTIONS = ("normal", "exponential", "mvn")

RESULT_COLUMNS = ("method", "dist", "skew", "seed", "n_train", "mse_oracle", "mae",
                  "bmae", "hist_l1", "sigma_final", "wall_ms")

DEFAULTS = {
    "n_train": 1024,
    "n_test": 1000,        # grid points per dimension for 1-D test sets
    "n_test_2d": 50,       # grid points per dimension for 2-D test sets
    "gmm_components": 2,
    "n_bins": 100,
    "bandwidth": None,     # None: two bin widths
    "n_regions": 100,
    "hist_bins": 10,
    "reweight_density": "fitted",   # or "true"
    "true_sigma": 1.0,
    "sigma_init": 1.0,
    "batch_size": 256,
    "epochs": None,        # None: recipe default
    "lr": None,
    "oracle": {"kind": "linear"},
    "model": None,         # None: linear for linear oracles, mlp otherwise
}


def recipe(dim: int, nonlinear: bool) -> dict:
    """Training recipe: SGD for 1-D linear fits, Adam for 2-D or nonlinear fits."""
    if dim == 1 and not nonlinear:
        return {"optimizer": "sgd", "lr": 1e-3, "momentum": 0.9, "epochs": 2000}
    return {"optimizer": "adam", "lr": 0.2, "epochs": 10000}


@dataclass(frozen=True)
class RunSpec:
    method: str
    dist: str
    skew: str
    seed: int
    options: tuple = ()

    @property
    def key(self):
        return (self.method, self.dist, self.skew, self.seed)

    def opts(self) -> dict:
        return {**DEFAULTS, **dict(self.options)}


def _train_seed(seed: int, method: str) -> int:
    # data depends on seed only; each method gets its own stream
    return int(np.random.SeedSequence([seed, zlib.crc32(method.encode())]).generate_state(1)[0])


def run_one(run: RunSpec, with_curves: bool = False) -> dict:
    """Generate data, fit the prior the method needs, train and evaluate."""
    t0 = time.perf_counter()
    o = run.opts()
    loss, learn = METHODS[run.method]
    spec = label_dist(run.dist, run.skew)
    oracle = OracleFn.from_dict(o["oracle"])
    nonlinear = oracle.kind != "linear"

    train_set = generate(spec, oracle, o["n_train"], run.seed, "train")
    n_test = o["n_test"] if spec.dim == 1 else o["n_test_2d"]
    test_set = generate(spec, oracle, n_test, run.seed, "test")

    prior = None
    if loss is LossKind.GAI or (loss is LossKind.REWEIGHT and o["reweight_density"] == "fitted"):
        prior = fit_gmm(train_set.y, o["gmm_components"], run.seed)
    elif loss is LossKind.REWEIGHT:
        prior = spec
    elif loss is LossKind.BNI:
        prior = fit_binned(train_set.y, o["n_bins"], spec.bounds, o["bandwidth"])

    r = recipe(spec.dim, nonlinear)
    lr = o["lr"] if o["lr"] is not None else r["lr"]
    opt = SGD(lr, r["momentum"]) if r["optimizer"] == "sgd" else Adam(lr)
    config = TrainConfig(
        loss=loss,
        optimizer=opt,
        epochs=o["epochs"] or r["epochs"],
        batch_size=o["batch_size"],
        seed=_train_seed(run.seed, run.method),
        sigma=o["sigma_init"] if learn else o["true_sigma"],
        learn_sigma=learn,
        model=o["model"] or ("mlp" if nonlinear else "linear"),
    )
    model, trace = train(train_set, config, prior)
    report = eval_model(model, test_set, RegionSpec.from_bounds(spec.bounds, o["n_regions"]),
                        o["hist_bins"])
    row = {
        "method": run.method,
        "dist": spec.name,
        "skew": run.skew,
        "seed": run.seed,
        "n_train": len(train_set),
        "mse_oracle": report.mse_vs_oracle,
        "mae": report.mae,
        "bmae": report.bmae,
        "hist_l1": report.marginal_hist_l1,
        "sigma_final": model.noise.sigma,
        "wall_ms": (time.perf_counter() - t0) * 1e3,
    }
    if with_curves:
        row["_curves"] = {"label": test_set.y, "pred": forward(model, test_set.x),
                          "bounds": spec.bounds}
    return row


def _safe_run(args):
    run, with_curves = args
    try:
        return run_one(run, with_curves)
    except Exception as exc:  # a failed run must not stop the sweep
        log.error("run %s failed: %s", run.key, exc)
        row = {c: math.nan for c in RESULT_COLUMNS}
        row.update(method=run.method, dist=label_dist(run.dist, run.skew).name, skew=run.skew,
                   seed=run.seed, n_train=0, _error=str(exc))
        return row


@dataclass
class ComparisonResult:
    rows: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [r for r in self.rows if "_error" in r]

    def values(self, metric: str, method: str, dist: str | None = None,
               skew: str | None = None) -> np.ndarray:
        sel = [r[metric] for r in self.rows
               if r["method"] == method
               and (dist is None or r["dist"].lower() == dist.lower())
               and (skew is None or r["skew"] == skew)]
        return np.asarray(sel, dtype=float)

    def aggregate(self, metric: str = "mse_oracle") -> list:
        """Mean and std over seeds per (method, dist, skew)."""
        groups = {}
        for r in self.rows:
            groups.setdefault((r["method"], r["dist"], r["skew"]), []).append(r[metric])
        out = []
        for (method, dist, skew), vals in sorted(groups.items()):
            v = np.asarray(vals, dtype=float)
            out.append({"method": method, "dist": dist, "skew": skew, "n": v.size,
                        "mean": float(np.nanmean(v)) if np.any(np.isfinite(v)) else math.nan,
                        "std": float(np.nanstd(v)) if np.any(np.isfinite(v)) else math.nan})
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RESULT_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in RESULT_COLUMNS])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def run_comparison(methods, specs, seeds, overrides: dict | None = None, jobs: int = 1,
                   with_curves: bool = False) -> ComparisonResult:
    """Run every (method, spec, seed) combination.

    ``specs`` is a sequence of ``(dist, skew)`` pairs. Rows come back sorted
    by (method, dist, skew, seed) whatever order the workers finish in.
    """
    methods = list(methods)
    specs = list(specs)
    if not methods:
        raise ValueError("at least one method is required")
    if not specs:
        raise ValueError("at least one (distribution, skew) spec is required")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}; choose from {sorted(METHODS)}")
    opts = tuple(sorted((overrides or {}).items(), key=lambda kv: kv[0]))
    runs = [RunSpec(m, d, s.lower(), int(seed), opts)
            for m in methods for d, s in specs for seed in seeds]
    tasks = [(r, with_curves) for r in runs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_safe_run, tasks))
    else:
        rows = [_safe_run(t) for t in tasks]
    order = {m: i for i, m in enumerate(methods)}
    rows.sort(key=lambda r: (order[r["method"]], r["dist"], r["skew"], r["seed"]))
    return ComparisonResult(rows)


PRESETS = {
    "table-synthetic": {
        "methods": list(TABLE_METHODS),
        "specs": [[d, s] for d in DISTRIBUTIONS for s in ("high", "moderate", "low")],
        "seeds": [0],
    },
    "seed-study": {
        "methods": ["vanilla", "reweight", "gai"],
        "specs": [["exponential", "high"]],
        "seeds": list(range(10)),
    },
}
