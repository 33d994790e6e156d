"""JSON run configuration: schema, loading and conversion to library objects."""
from __future__ import annotations

import json

import jsonschema

from .bench.datasets import SKEW_LEVELS, LabelDistSpec, OracleFn, label_dist
from .bench.runner import DEFAULTS, DISTRIBUTIONS, METHODS, recipe
from .losses import LossKind
from .optim import SGD, Adam
from .training import TrainConfig


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps it to exit code 2."""


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer"}
_SEED = {"type": "integer", "minimum": 0}
_SKEW = {"enum": [*SKEW_LEVELS, "mod"]}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

_ORACLE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["linear", "sinusoid", "cubic", "logistic", "piecewise_linear"]},
        "a": _NUM, "b": _NUM, "amp": _NUM, "freq": _NUM, "c": _NUM,
        "slope": _NUM, "scale": _NUM,
        "knots": {"type": "array", "items": _NUM},
        "slopes": {"type": "array", "items": _NUM},
    },
}

_LABEL_DIST = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "params", "range"],
    "properties": {
        "kind": {"enum": list(DISTRIBUTIONS)},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mean": {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 1}]},
                "std": _POS,
                "rate": _POS,
                "offset": _NUM,
                "cov": {"type": "array", "items": {"type": "array", "items": _NUM}},
            },
        },
        "range": {"oneOf": [_PAIR, {"type": "array", "items": _PAIR, "minItems": 1}]},
        "skew": {"type": ["string", "null"]},
    },
}

_OVERRIDES = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n_train": {"type": "integer", "minimum": 1},
        "n_test": {"type": "integer", "minimum": 2},
        "n_test_2d": {"type": "integer", "minimum": 2},
        "gmm_components": {"type": "integer", "minimum": 1},
        "n_bins": {"type": "integer", "minimum": 2},
        "bandwidth": {"type": ["number", "null"], "minimum": 0},
        "n_regions": {"type": "integer", "minimum": 1},
        "hist_bins": {"type": "integer", "minimum": 1},
        "reweight_density": {"enum": ["fitted", "true"]},
        "true_sigma": _POS,
        "sigma_init": _POS,
        "batch_size": {"type": "integer", "minimum": 2},
        "epochs": {"type": ["integer", "null"], "minimum": 1},
        "lr": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "oracle": _ORACLE,
        "model": {"enum": ["linear", "mlp", None]},
    },
}
assert set(_OVERRIDES["properties"]) == set(DEFAULTS)

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dist": {"enum": list(DISTRIBUTIONS)},
                "skew": _SKEW,
                "label_dist": _LABEL_DIST,
                "oracle": _ORACLE,
                "n": {"type": "integer", "minimum": 1},
                "n_test": {"type": "integer", "minimum": 2},
                "seed": _SEED,
                "split": {"enum": ["train", "test"]},
                "noise_scale": _POS,
            },
        },
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["gmm", "binned", "true"]},
                "K": {"type": "integer", "minimum": 1},
                "n_bins": {"type": "integer", "minimum": 2},
                "bandwidth": {"type": ["number", "null"], "minimum": 0},
                "seed": _SEED,
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "loss": {"enum": [k.value for k in LossKind]},
                "optimizer": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["sgd", "adam"]},
                        "lr": _POS,
                        "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "beta1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "beta2": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "eps": _POS,
                    },
                },
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 1},
                "seed": _SEED,
                "sigma": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mode"],
                    "properties": {"mode": {"enum": ["fixed", "learnable"]}, "value": _POS},
                },
                "model": {"enum": ["linear", "mlp"]},
                "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "reweight_clip": _POS,
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_regions": {"type": "integer", "minimum": 1},
                "hist_bins": {"type": "integer", "minimum": 1},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "methods": {"type": "array", "items": {"enum": sorted(METHODS)}, "minItems": 1},
                "specs": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "prefixItems": [{"enum": list(DISTRIBUTIONS)}, _SKEW],
                              "minItems": 2, "maxItems": 2},
                },
                "seeds": {"type": "array", "items": _SEED, "minItems": 1},
                "overrides": _OVERRIDES,
                "curves": {"type": "boolean"},
                "svg": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string", "minLength": 1}},
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def validate(doc) -> dict:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        raise ConfigError(f"config error at {path}: {err.message}")
    return doc


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return validate(doc)


def apply_seed(doc: dict, seed: int | None) -> dict:
    """``--seed`` overrides every seed in the document."""
    if seed is None:
        return doc
    doc = json.loads(json.dumps(doc))
    doc.setdefault("dataset", {})["seed"] = seed
    doc.setdefault("train", {})["seed"] = seed
    if "sweep" in doc:
        doc["sweep"]["seeds"] = [seed]
    return validate(doc)


def dataset_spec(doc: dict) -> LabelDistSpec:
    ds = doc.get("dataset", {})
    try:
        if "label_dist" in ds:
            return LabelDistSpec.from_dict(ds["label_dist"])
        return label_dist(ds.get("dist", "normal"), ds.get("skew", "high"))
    except (ValueError, KeyError, TypeError, ArithmeticError) as exc:
        raise ConfigError(f"config error at $.dataset: {exc}") from exc


def dataset_oracle(doc: dict) -> OracleFn:
    try:
        return OracleFn.from_dict(doc.get("dataset", {}).get("oracle", {"kind": "linear"}))
    except ValueError as exc:
        raise ConfigError(f"config error at $.dataset.oracle: {exc}") from exc


def train_config(doc: dict, dim: int, nonlinear: bool) -> TrainConfig:
    """Build a TrainConfig; unset fields follow the recipe for the data shape."""
    tr = doc.get("train", {})
    r = recipe(dim, nonlinear)
    opt = tr.get("optimizer", {"kind": r["optimizer"]})
    lr = opt.get("lr", r["lr"] if opt["kind"] == r["optimizer"] else 1e-3)
    if opt["kind"] == "sgd":
        optimizer = SGD(lr, opt.get("momentum", 0.9))
    else:
        optimizer = Adam(lr, opt.get("beta1", 0.9), opt.get("beta2", 0.999), opt.get("eps", 1e-8))
    sigma = tr.get("sigma", {"mode": "fixed"})
    try:
        return TrainConfig(
            loss=LossKind(tr.get("loss", "mse")),
            optimizer=optimizer,
            epochs=tr.get("epochs", r["epochs"]),
            batch_size=tr.get("batch_size", 256),
            seed=tr.get("seed", doc.get("dataset", {}).get("seed", 0)),
            sigma=sigma.get("value", 1.0),
            learn_sigma=sigma["mode"] == "learnable",
            model=tr.get("model", "mlp" if nonlinear else "linear"),
            hidden=tuple(tr.get("hidden", (64, 64))),
            reweight_clip=tr.get("reweight_clip", 1e4),
        )
    except ValueError as exc:
        raise ConfigError(f"config error at $.train: {exc}") from exc
