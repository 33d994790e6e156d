import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balanced_mse.bench import (
    LabelDistSpec,
    OracleFn,
    RegionSpec,
    SyntheticDataset,
    balanced_mae,
    eval_model,
    generate,
    label_dist,
    marginal_hist_l1,
    run_comparison,
    run_one,
)
from balanced_mse.bench.metrics import evaluate_predictions
from balanced_mse.bench.runner import RESULT_COLUMNS, RunSpec, _train_seed, recipe
from balanced_mse.models import ModelParams

NONLINEAR = ["sinusoid", "cubic", "logistic", "piecewise_linear"]
QUICK = {"epochs": 20, "n_train": 256, "n_test": 101}


# -- datasets ---------------------------------------------------------------

@pytest.mark.parametrize("kind", ["linear"] + NONLINEAR)
def test_train_split_reconstructs_labels(kind):
    data = generate(label_dist("exponential", "high"), OracleFn(kind), 2000, seed=5)
    np.testing.assert_allclose(data.oracle(data.x) + data.eps, data.y, rtol=0, atol=1e-10)


def test_test_grid():
    data = generate(label_dist("exponential", "high"), OracleFn("linear"), 101, split="test")
    np.testing.assert_allclose(data.y[:, 0], np.linspace(0, 10, 101), atol=1e-15)
    np.testing.assert_allclose(np.diff(data.y[:, 0]), 0.1, atol=1e-12)
    np.testing.assert_array_equal(data.eps, 0.0)


def test_test_grid_2d():
    data = generate(label_dist("mvn", "high"), OracleFn("linear"), 50, split="test")
    assert data.y.shape == (2500, 2)
    assert len(np.unique(data.y[:, 0])) == 50


@pytest.mark.parametrize("kind", ["normal", "exponential"])
def test_sample_moments(kind):
    spec = label_dist(kind, "high")
    y = spec.sample(1_000_000, np.random.default_rng(0))[:, 0]
    mean, std = spec.truncated_moments()
    assert abs(y.mean() - mean) < 3e-3 and abs(y.std() - std) < 3e-3
    lo, hi = spec.bounds[0]
    assert y.min() >= lo and y.max() <= hi


def test_mvn_sample_covariance():
    spec = label_dist("mvn", "moderate")
    y = spec.sample(200_000, np.random.default_rng(1))
    # truncation at +-5 removes a negligible tail for unit variance
    np.testing.assert_allclose(np.cov(y.T), np.eye(2), atol=0.02)


def test_truncated_density_integrates_to_one():
    spec = label_dist("normal", "low")
    grid = np.linspace(-5, 5, 20001)
    assert abs(np.trapezoid(spec.density(grid[:, None]), grid) - 1) < 1e-8
    assert spec.density([[6.0]])[0] == 0.0


def test_skew_levels_order():
    stds = [label_dist("normal", s).params["std"] for s in ("low", "moderate", "high")]
    assert stds == sorted(stds, reverse=True)
    assert label_dist("normal", "mod").skew == "moderate"
    with pytest.raises(ValueError):
        label_dist("normal", "extreme")
    with pytest.raises(ValueError):
        label_dist("uniform", "high")


def test_generate_is_deterministic():
    spec = label_dist("normal", "high")
    a, b = generate(spec, OracleFn("sinusoid"), 300, 7), generate(spec, OracleFn("sinusoid"), 300, 7)
    assert a.x.tobytes() == b.x.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert generate(spec, OracleFn("sinusoid"), 300, 8).y.tobytes() != a.y.tobytes()


def test_generate_rejects_bad_arguments():
    spec = label_dist("normal", "high")
    with pytest.raises(ValueError, match="positive"):
        generate(spec, OracleFn(), 0)
    with pytest.raises(ValueError, match="split"):
        generate(spec, OracleFn(), 10, split="val")


def test_spec_validation():
    with pytest.raises(ValueError):
        LabelDistSpec("normal", {"mean": 0.0, "std": 0.0}, (-1, 1))
    with pytest.raises(ValueError, match="range"):
        LabelDistSpec("normal", {"mean": 0.0, "std": 1.0}, (1, -1))
    with pytest.raises(np.linalg.LinAlgError):
        LabelDistSpec("mvn", {"mean": [0, 0], "cov": [[1, 2], [2, 1]]}, ((-1, 1), (-1, 1)))


def test_csv_round_trip(tmp_path):
    data = generate(label_dist("mvn", "low"), OracleFn("cubic"), 50, seed=3)
    data.to_csv(tmp_path / "d.csv")
    back = SyntheticDataset.from_csv(tmp_path / "d.csv", json.loads(json.dumps(data.sidecar())))
    for name in ("x", "y", "eps"):
        assert getattr(back, name).tobytes() == getattr(data, name).tobytes()
    assert back.oracle == data.oracle and back.spec.params == data.spec.params


# -- oracles ----------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.sampled_from(NONLINEAR), st.floats(-20, 20))
def test_oracle_inverse(kind, y):
    f = OracleFn(kind)
    x = f.inverse(np.array([y]))
    assert abs(f(x)[0] - y) < 1e-9 * max(1.0, abs(y))


@pytest.mark.parametrize("kind", ["linear"] + NONLINEAR)
def test_oracle_strictly_increasing(kind):
    grid = np.linspace(-15, 15, 10001)
    assert np.all(np.diff(OracleFn(kind)(grid)) > 0)


def test_piecewise_linear_values():
    f = OracleFn("piecewise_linear", {"knots": [0.0, 1.0], "slopes": [1.0, 2.0, 3.0]})
    np.testing.assert_allclose(f([-1.0, 0.0, 0.5, 1.0, 2.0]), [-1.0, 0.0, 1.0, 2.0, 5.0])


@pytest.mark.parametrize("kind, params", [
    ("linear", {"a": 0.0}),
    ("sinusoid", {"amp": 1.5}),
    ("cubic", {"c": -1.0}),
    ("logistic", {"slope": 0.0}),
    ("piecewise_linear", {"knots": [0.0], "slopes": [1.0, -1.0]}),
    ("quadratic", {}),
])
def test_invalid_oracles(kind, params):
    with pytest.raises(ValueError):
        OracleFn(kind, params)


# -- metrics ----------------------------------------------------------------

def test_constant_predictor_metrics():
    regions = RegionSpec((0.0,), (5.0,), 5)
    report = evaluate_predictions(np.full((2, 1), 2.5), np.array([[0.0], [5.0]]), regions)
    assert (report.mae, report.bmae) == (2.5, 2.5)


def test_balanced_mae_hand_case():
    bmae, per_region, empty = balanced_mae([1.0, 3.0, 10.0], [0, 0, 1], 3)
    assert bmae == 6.0
    assert np.mean([1.0, 3.0, 10.0]) == pytest.approx(4.667, abs=1e-3)
    np.testing.assert_array_equal(per_region[:2], [2.0, 10.0])
    assert np.isnan(per_region[2]) and empty == 1


def test_bmae_equals_mae_on_uniform_grid():
    regions = RegionSpec((0.0,), (10.0,), 100)
    labels = np.repeat(regions.boundaries[:-1] + 0.05, 4)
    err = np.random.default_rng(0).uniform(0, 3, labels.size)
    bmae, _, empty = balanced_mae(err, regions.assign(labels), 100)
    assert empty == 0 and abs(bmae - err.mean()) < 1e-12


def test_region_assignment_edges():
    regions = RegionSpec((0.0,), (10.0,), 10)
    np.testing.assert_array_equal(regions.assign([0.0, 0.99, 1.0, 9.99, 10.0]), [0, 0, 1, 9, 9])


def test_region_assignment_2d_uses_radius():
    regions = RegionSpec((-5.0, -5.0), (5.0, 5.0), 10)
    r_max = 0.5 * np.hypot(10, 10)
    idx = regions.assign([[0.0, 0.0], [3.0, 4.0], [5.0, 5.0]])
    np.testing.assert_array_equal(idx, [0, int(5.0 / (r_max / 10)), 9])


def test_hist_l1_hand_cases():
    uniform = np.linspace(0.05, 9.95, 100)
    assert marginal_hist_l1(uniform, 0, 10, 10) == pytest.approx(0.0, abs=1e-12)
    assert marginal_hist_l1(np.full(50, 3.3), 0, 10, 10) == pytest.approx(1.8)
    assert marginal_hist_l1(np.full(50, 11.0), 0, 10, 10) == pytest.approx(2.0)


def test_eval_perfect_model_and_purity():
    test = generate(label_dist("normal", "high"), OracleFn("linear"), 101, split="test")
    model = ModelParams("linear", [np.eye(1)], [np.zeros(1)])
    before = [a.copy() for a in model.arrays()]
    r1, r2 = eval_model(model, test), eval_model(model, test)
    assert r1.mse_vs_oracle == 0.0 and r1.bmae == 0.0
    assert r1.to_dict() == r2.to_dict()
    for a, b in zip(before, model.arrays()):
        np.testing.assert_array_equal(a, b)


def test_eval_needs_test_split():
    train = generate(label_dist("normal", "high"), OracleFn("linear"), 10)
    with pytest.raises(ValueError, match="test split"):
        eval_model(ModelParams("linear", [np.eye(1)], [np.zeros(1)]), train)


def test_report_json_has_no_nan():
    test = generate(label_dist("exponential", "high"), OracleFn("linear"), 11, split="test")
    doc = eval_model(ModelParams("linear", [np.eye(1)], [np.zeros(1)]), test).to_dict()
    assert None in doc["per_region_mae"]
    json.dumps(doc, allow_nan=False)


# -- runner -----------------------------------------------------------------

def test_recipe():
    assert recipe(1, False)["optimizer"] == "sgd"
    assert recipe(2, False)["optimizer"] == "adam" and recipe(1, True)["optimizer"] == "adam"


def test_run_one_row():
    row = run_one(RunSpec("gai", "normal", "high", 0, tuple(QUICK.items())))
    assert set(RESULT_COLUMNS) <= set(row)
    assert row["n_train"] == 256 and row["dist"] == "Normal"
    assert all(math.isfinite(row[c]) for c in ("mse_oracle", "bmae", "hist_l1", "sigma_final"))


def test_run_comparison_sorted_and_deterministic():
    args = (["reweight", "vanilla"], [("exponential", "high")], [1, 0], QUICK)
    a, b = run_comparison(*args), run_comparison(*args, jobs=2)
    keys = [(r["method"], r["seed"]) for r in a.rows]
    assert keys == [("reweight", 0), ("reweight", 1), ("vanilla", 0), ("vanilla", 1)]
    for ra, rb in zip(a.rows, b.rows):
        assert {k: v for k, v in ra.items() if k != "wall_ms"} == {k: v for k, v in rb.items() if k != "wall_ms"}
    assert a.values("mse_oracle", "vanilla", "exponential", "high").shape == (2,)


def test_failed_run_becomes_nan_row(tmp_path):
    res = run_comparison(["vanilla", "gai"], [("normal", "high")], [0], {**QUICK, "lr": -1.0})
    assert len(res.failed) == 2 and all(math.isnan(r["mse_oracle"]) for r in res.rows)
    agg = res.aggregate()
    assert all(math.isnan(g["mean"]) for g in agg)
    res.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().count("nan") >= 2


def test_run_comparison_validates():
    with pytest.raises(ValueError, match="method"):
        run_comparison([], [("normal", "high")], [0])
    with pytest.raises(ValueError, match="unknown"):
        run_comparison(["ridge"], [("normal", "high")], [0])
    with pytest.raises(ValueError, match="spec"):
        run_comparison(["vanilla"], [], [0])


def test_train_seed_differs_per_method():
    seeds = {_train_seed(3, m) for m in ("vanilla", "reweight", "gai", "bmc")}
    assert len(seeds) == 4 and _train_seed(3, "gai") == _train_seed(3, "gai")
