import csv
import json
import subprocess
import sys

import pytest

from balanced_mse.cli import main


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


BASE = {
    "dataset": {"dist": "exponential", "skew": "high", "n": 256, "n_test": 101, "seed": 1},
    "prior": {"K": 2},
    "train": {"loss": "gai", "epochs": 50, "sigma": {"mode": "learnable"}},
}


def test_gen_is_byte_identical(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE)
    assert main(["gen", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", cfg, "--out", str(tmp_path / "b"), "gen"]) == 0
    for name in ("train.csv", "train.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = list(csv.reader(open(tmp_path / "a" / "train.csv")))
    assert rows[0] == ["x_0", "y_0", "eps_0"] and len(rows) == 257
    assert "wrote 256 rows" in capsys.readouterr().out


def test_seed_flag_changes_data(tmp_path):
    cfg = write_config(tmp_path, BASE)
    main(["gen", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["gen", "--config", cfg, "--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "train.csv").read_bytes() != (tmp_path / "b" / "train.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "train.json").read_text())["seed"] == 2


def test_full_pipeline(tmp_path, capsys):
    cfg = write_config(tmp_path, BASE)
    out = str(tmp_path / "run")
    assert main(["gen", "--config", cfg, "--out", out]) == 0
    data = str(tmp_path / "run" / "train.csv")
    assert main(["fit-prior", "--config", cfg, "--out", out, "--data", data]) == 0
    prior = json.loads((tmp_path / "run" / "prior.json").read_text())
    assert prior["kind"] == "gmm" and len(prior["weights"]) == 2
    assert main(["train", "--config", cfg, "--out", out, "--data", data,
                 "--prior", str(tmp_path / "run" / "prior.json")]) == 0
    trace = list(csv.reader(open(tmp_path / "run" / "trace.csv")))
    assert trace[0] == ["epoch", "mean_loss", "sigma"] and len(trace) == 51
    assert main(["eval", "--config", cfg, "--out", out]) == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert {"mse_vs_oracle", "mae", "bmae", "marginal_hist_l1", "empty_regions"} <= set(report)
    assert "bmae" in capsys.readouterr().out


def test_binned_prior_for_bni(tmp_path):
    doc = {**BASE, "prior": {"n_bins": 40}, "train": {"loss": "bni", "epochs": 5}}
    cfg = write_config(tmp_path, doc)
    assert main(["fit-prior", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "prior.json").read_text())["kind"] == "binned"


@pytest.mark.parametrize("doc, where", [
    ({"dataset": {"n": 0}}, "$.dataset.n"),
    ({"dataset": {"n": 10, "colour": "red"}}, "$.dataset"),
    ({"train": {"loss": "huber"}}, "$.train.loss"),
    ({"sweep": {"methods": []}}, "$.sweep.methods"),
])
def test_invalid_config_exits_2(tmp_path, capsys, doc, where):
    assert main(["gen", "--config", write_config(tmp_path, doc)]) == 2
    assert f"config error at {where}" in capsys.readouterr().err


def test_unreadable_configs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["gen", "--config", str(bad)]) == 2
    assert main(["gen", "--config", str(tmp_path / "missing.json")]) == 2


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["verify", "nope"]) == 2
    assert main(["gen", "--jobs", "0", "--out", str(tmp_path)]) == 2
    assert main(["eval", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--out", str(tmp_path)]) == 2
    assert main(["sweep", "--preset", "nope", "--out", str(tmp_path)]) == 2
    cfg = write_config(tmp_path, {"prior": {"kind": "true"}})
    assert main(["fit-prior", "--config", cfg, "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_bad_log_level(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BR_LOG", "chatty")
    assert main(["verify", "theorem1"]) == 2
    assert "BR_LOG" in capsys.readouterr().err


def test_divergent_training_exits_1(tmp_path, capsys):
    doc = {**BASE, "train": {"loss": "mse", "epochs": 50, "optimizer": {"kind": "sgd", "lr": 1e6}}}
    with pytest.warns(RuntimeWarning):
        code = main(["train", "--config", write_config(tmp_path, doc), "--out", str(tmp_path)])
    assert code == 1
    assert "TrainingError" in capsys.readouterr().err
    assert not (tmp_path / "model.json").exists()


def test_verify_suite(capsys):
    assert main(["verify", "theorem1"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2 and "2/2 checks passed" in out


def test_small_sweep(tmp_path, capsys):
    doc = {"sweep": {"methods": ["vanilla", "gai"], "specs": [["normal", "high"], ["mvn", "high"]],
                     "seeds": [0], "overrides": {"epochs": 5, "n_train": 128, "n_test": 51,
                                                 "n_test_2d": 10}}}
    assert main(["sweep", "--config", write_config(tmp_path, doc), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "results.csv")))
    assert len(rows) == 4 and {r["method"] for r in rows} == {"vanilla", "gai"}
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "method,dist,skew,metric,n,mean,std" and len(summary) == 13
    curves = sorted(p.name for p in (tmp_path / "curves").iterdir())
    assert "gai_normal_high_seed0_pred.txt" in curves and "gai_mvn_high_seed0_hist_d1.txt" in curves
    assert "4/4 runs succeeded" in capsys.readouterr().out


def test_sweep_with_every_run_failing_exits_1(tmp_path, capsys):
    doc = {"sweep": {"methods": ["vanilla"], "specs": [["normal", "high"]], "seeds": [0],
                     "overrides": {"epochs": 5, "oracle": {"kind": "sinusoid", "amp": 1.5}},
                     "curves": False}}
    assert main(["sweep", "--config", write_config(tmp_path, doc), "--out", str(tmp_path)]) == 1
    assert "FAILED vanilla" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "balanced_mse", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("gen", "fit-prior", "train", "eval", "sweep", "verify"):
        assert name in proc.stdout
