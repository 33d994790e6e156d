"""Command-line front end.

    balanced-mse gen        --config run.json --out data/
    balanced-mse fit-prior  --config run.json --out data/
    balanced-mse train      --config run.json --out data/
    balanced-mse eval       --config run.json --out data/
    balanced-mse sweep      --preset table-synthetic --out results/ --jobs 4
    balanced-mse verify     all

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
``BR_LOG`` (error, info, debug) sets the logging level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from .bench.datasets import SyntheticDataset, generate
from .bench.metrics import RegionSpec, eval_model
from .bench.runner import DEFAULTS, PRESETS, run_comparison
from .config import ConfigError
from .losses import LossKind
from .models import ModelParams
from .priors import GmmPrior, fit_binned, fit_gmm, prior_from_json, prior_to_json
from .training import TrainingError, train
from .verify import SUITES, run_suite

log = logging.getLogger("balanced_mse")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def atomic_write(path: Path, write) -> Path:
    """Call ``write(tmp_path)`` and rename the result onto ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()
    return path


def write_text(path: Path, text: str) -> Path:
    return atomic_write(path, lambda p: p.write_text(text))


def write_json(path: Path, doc) -> Path:
    return write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _series(columns, header: str) -> str:
    rows = "\n".join(" ".join(repr(float(v)) for v in row) for row in zip(*columns))
    return f"# {header}\n{rows}\n"


# ---------------------------------------------------------------------------
# shared steps
# ---------------------------------------------------------------------------

def _out_dir(args, doc) -> Path:
    return Path(args.out or doc.get("output", {}).get("dir", "."))


def _train_set(args, doc) -> SyntheticDataset:
    if args.data:
        csv_path = Path(args.data)
        side = csv_path.with_suffix(".json")
        if not csv_path.exists() or not side.exists():
            raise UsageError(f"dataset {csv_path} or its sidecar {side} is missing")
        return SyntheticDataset.from_csv(csv_path, json.loads(side.read_text()))
    ds = doc.get("dataset", {})
    return generate(cfg.dataset_spec(doc), cfg.dataset_oracle(doc), ds.get("n", 1024),
                    ds.get("seed", 0), "train", ds.get("noise_scale", 1.0))


def _prior_kind(doc) -> str:
    pc = doc.get("prior", {})
    if "kind" in pc:
        return pc["kind"]
    return "binned" if doc.get("train", {}).get("loss") == LossKind.BNI.value else "gmm"


def _fit_prior(doc, dataset: SyntheticDataset):
    pc = doc.get("prior", {})
    kind = _prior_kind(doc)
    seed = pc.get("seed", doc.get("dataset", {}).get("seed", 0))
    if kind == "gmm":
        return fit_gmm(dataset.y, pc.get("K", DEFAULTS["gmm_components"]), seed)
    if kind == "binned":
        return fit_binned(dataset.y, pc.get("n_bins", DEFAULTS["n_bins"]), dataset.spec.bounds,
                          pc.get("bandwidth", DEFAULTS["bandwidth"]))
    return dataset.spec   # "true": the generating density


def _test_set(doc, spec, oracle):
    n = doc.get("dataset", {}).get("n_test")
    if n is None:
        n = DEFAULTS["n_test"] if spec.dim == 1 else DEFAULTS["n_test_2d"]
    return generate(spec, oracle, n, doc.get("dataset", {}).get("seed", 0), "test")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args, doc) -> int:
    ds = doc.get("dataset", {})
    split = ds.get("split", "train")
    data = generate(cfg.dataset_spec(doc), cfg.dataset_oracle(doc), ds.get("n", 1024),
                    ds.get("seed", 0), split, ds.get("noise_scale", 1.0))
    out = _out_dir(args, doc)
    csv_path = atomic_write(out / f"{split}.csv", data.to_csv)
    write_json(out / f"{split}.json", data.sidecar())
    print(f"wrote {len(data)} rows to {csv_path}")
    return EXIT_OK


def cmd_fit_prior(args, doc) -> int:
    if _prior_kind(doc) == "true":
        raise ConfigError("config error at $.prior.kind: 'true' uses the generating density; nothing to fit")
    data = _train_set(args, doc)
    prior = _fit_prior(doc, data)
    path = write_text(_out_dir(args, doc) / "prior.json", prior_to_json(prior) + "\n")
    if isinstance(prior, GmmPrior):
        print(f"fitted {prior.n_components}-component GMM "
              f"(mean log-likelihood {prior.log_likelihoods[-1]:.6f}) -> {path}")
    else:
        print(f"fitted {prior.densities.size}-bin prior -> {path}")
    return EXIT_OK


def cmd_train(args, doc) -> int:
    data = _train_set(args, doc)
    tc = cfg.train_config(doc, data.y.shape[1], data.oracle.kind != "linear")
    prior = None
    if tc.loss in (LossKind.GAI, LossKind.BNI, LossKind.REWEIGHT):
        if args.prior:
            prior = prior_from_json(Path(args.prior).read_text())
        else:
            prior = _fit_prior(doc, data)
    model, trace = train(data, tc, prior)
    out = _out_dir(args, doc)
    doc_model = {"model": model.to_dict(), "loss": tc.loss.value, "epochs": tc.epochs,
                 "seed": tc.seed}
    write_json(out / "model.json", doc_model)
    atomic_write(out / "trace.csv", trace.to_csv)
    print(f"trained {tc.model}/{tc.loss.value} for {tc.epochs} epochs: "
          f"final loss {trace.mean_loss[-1]:.6g}, sigma {trace.sigma[-1]:.4g} -> {out / 'model.json'}")
    return EXIT_OK


def cmd_eval(args, doc) -> int:
    out = _out_dir(args, doc)
    model_path = Path(args.model) if args.model else out / "model.json"
    if not model_path.exists():
        raise UsageError(f"model file {model_path} not found (run `train` first or pass --model)")
    model = ModelParams.from_dict(json.loads(model_path.read_text())["model"])
    spec = cfg.dataset_spec(doc)
    test = _test_set(doc, spec, cfg.dataset_oracle(doc))
    ev = doc.get("eval", {})
    regions = RegionSpec.from_bounds(spec.bounds, ev.get("n_regions", DEFAULTS["n_regions"]))
    report = eval_model(model, test, regions, ev.get("hist_bins", DEFAULTS["hist_bins"]))
    write_json(out / "report.json", report.to_dict())
    print(f"mse_vs_oracle {report.mse_vs_oracle:.6g}  mae {report.mae:.6g}  "
          f"bmae {report.bmae:.6g}  hist_l1 {report.marginal_hist_l1:.4g}  "
          f"empty regions {report.empty_regions}")
    return EXIT_OK


def _write_curves(out: Path, rows, svg: bool):
    curve_dir = out / "curves"
    for r in rows:
        if "_curves" not in r:
            continue
        c = r["_curves"]
        stem = f"{r['method']}_{r['dist'].lower()}_{r['skew']}_seed{r['seed']}"
        label, pred, bounds = c["label"], c["pred"], c["bounds"]
        for j in range(label.shape[1]):
            suffix = "" if label.shape[1] == 1 else f"_d{j}"
            write_text(curve_dir / f"{stem}_pred{suffix}.txt",
                       _series([label[:, j], pred[:, j]], "oracle_label prediction"))
            lo, hi = bounds[j]
            freq, edges = np.histogram(pred[:, j], bins=DEFAULTS["hist_bins"], range=(lo, hi))
            centers = 0.5 * (edges[:-1] + edges[1:])
            write_text(curve_dir / f"{stem}_hist{suffix}.txt",
                       _series([centers, freq / pred.shape[0]], "bin_center fraction"))
            if svg:
                _write_svg(curve_dir / f"{stem}{suffix}.svg", label[:, j], pred[:, j], centers,
                           freq / pred.shape[0], stem)


def _write_svg(path, label, pred, centers, freq, title):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib is not installed; skipping %s", path)
        return
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8, 3.2))
    order = np.argsort(label)
    ax0.plot(label[order], label[order], "k--", lw=1, label="oracle")
    ax0.plot(label[order], pred[order], lw=1.5, label="prediction")
    ax0.set_xlabel("label")
    ax0.legend()
    ax1.bar(centers, freq, width=centers[1] - centers[0] if centers.size > 1 else 1.0)
    ax1.axhline(1.0 / centers.size, color="k", ls="--", lw=1)
    ax1.set_xlabel("predicted label")
    fig.suptitle(title)
    fig.tight_layout()
    atomic_write(path, lambda p: fig.savefig(p, format="svg", metadata={"Date": None}))
    plt.close(fig)


def cmd_sweep(args, doc) -> int:
    if args.preset is None and "sweep" not in doc:
        raise UsageError("sweep needs --preset or a config with a 'sweep' section")
    if args.preset is not None and args.preset not in PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    sw = dict(PRESETS[args.preset]) if args.preset else {}
    sw.update(doc.get("sweep", {}))
    if args.seed is not None:
        sw["seeds"] = [args.seed]
    missing = [k for k in ("methods", "specs", "seeds") if not sw.get(k)]
    if missing:
        raise ConfigError(f"config error at $.sweep: missing or empty {', '.join(missing)}")

    want_curves = sw.get("curves", True)
    svg = sw.get("svg", False) or args.svg
    result = run_comparison(sw["methods"], [tuple(s) for s in sw["specs"]], sw["seeds"],
                            sw.get("overrides"), jobs=args.jobs, with_curves=want_curves)
    out = _out_dir(args, doc)
    atomic_write(out / "results.csv", result.to_csv)

    lines = ["method,dist,skew,metric,n,mean,std"]
    for metric in ("mse_oracle", "bmae", "hist_l1"):
        for a in result.aggregate(metric):
            lines.append(f"{a['method']},{a['dist']},{a['skew']},{metric},{a['n']},"
                         f"{a['mean']!r},{a['std']!r}")
    write_text(out / "summary.csv", "\n".join(lines) + "\n")
    if want_curves:
        _write_curves(out, result.rows, svg)

    print(f"{'method':<10} {'dist':<12} {'skew':<9} {'mse_oracle (mean ± std)':>26}")
    for a in result.aggregate("mse_oracle"):
        print(f"{a['method']:<10} {a['dist']:<12} {a['skew']:<9} "
              f"{a['mean']:>13.4g} ± {a['std']:<10.3g}")
    for r in result.failed:
        print(f"FAILED {r['method']} {r['dist']} {r['skew']} seed {r['seed']}: {r['_error']}",
              file=sys.stderr)
    n_ok = len(result.rows) - len(result.failed)
    print(f"{n_ok}/{len(result.rows)} runs succeeded; results in {out / 'results.csv'}")
    return EXIT_OK if n_ok > 0 else EXIT_FAILURE


def cmd_verify(args, doc) -> int:
    results = run_suite(args.suite)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_FAILURE


COMMANDS = {
    "gen": (cmd_gen, "generate a synthetic dataset (CSV plus JSON sidecar)"),
    "fit-prior": (cmd_fit_prior, "fit the label prior (GMM or binned) on a training set"),
    "train": (cmd_train, "train a regressor and write model.json and trace.csv"),
    "eval": (cmd_eval, "evaluate a trained model on the noiseless test grid"),
    "sweep": (cmd_sweep, "run a method x distribution x seed comparison"),
    "verify": (cmd_verify, "run the numerical property suites"),
}


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=default, help="override every seed in the config")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--preset", default=default, help=f"sweep preset: {', '.join(PRESETS)}")
    parser.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="parallel sweep workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balanced-mse", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("fit-prior", "train"):
            p.add_argument("--data", help="existing train CSV (sidecar JSON next to it)")
        else:
            p.set_defaults(data=None)
        if name == "train":
            p.add_argument("--prior", help="prior JSON written by fit-prior")
        if name == "eval":
            p.add_argument("--model", help="model JSON written by train")
        if name == "sweep":
            p.add_argument("--svg", action="store_true", help="also render SVG plots")
        if name == "verify":
            p.add_argument("suite", choices=[*SUITES, "all"])
    return parser


def _setup_logging():
    level = os.environ.get("BR_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"BR_LOG must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:       # argparse uses 2 for usage errors
        return int(exc.code or 0)
    try:
        _setup_logging()
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        doc = cfg.load_config(args.config) if args.config else {}
        doc = cfg.apply_seed(doc, args.seed)
        return COMMANDS[args.command][0](args, doc)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, ValueError, TypeError, ArithmeticError, np.linalg.LinAlgError,
            OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
