"""Command-line surface: exit codes, warnings, files, config merging.

Commands run in-process through main(argv); stdout/stderr go through capsys.
"""

import json

import numpy as np
import pytest

from circfit.cli import main
from circfit.dataio import load_dataset, read_fit_result, write_dataset
from circfit.fit import Dataset


@pytest.fixture
def data_csv(tmp_path):
    rng = np.random.default_rng(31)
    x = np.sort(rng.uniform(-2.5, 2.5, 60))
    theta = 2.0 * np.arctan(x) + 0.3 * rng.standard_normal(60)
    w = x + 0.5 * rng.standard_normal(60)
    path = tmp_path / "data.csv"
    write_dataset(Dataset(theta=theta, w=w, x=x), path)
    return str(path)


def test_fit_happy_path(tmp_path, data_csv, capsys):
    out = tmp_path / "run"
    code = main([
        "fit", "--input", data_csv, "--estimator", "dk",
        "--family", "gaussian", "--sigma-u", "0.5",
        "--h", "0.6", "--out", str(out),
    ])
    assert code == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("fit: n=60")
    result = read_fit_result(out / "fit.csv")
    assert result["x"].size == 60
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["command"] == "fit"
    assert doc["parameters"]["sigma_u"] == 0.5


def test_fit_grid_option(tmp_path, data_csv):
    out = tmp_path / "run"
    code = main([
        "fit", "--input", data_csv, "--estimator", "naive",
        "--h", "0.6", "--grid=-2:2:15", "--out", str(out),
    ])
    assert code == 0
    result = read_fit_result(out / "fit.csv")
    assert np.array_equal(result["x"], np.linspace(-2, 2, 15))


def test_fit_usage_errors(tmp_path, data_csv, capsys):
    out = str(tmp_path / "run")
    # missing bandwidth
    assert main(["fit", "--input", data_csv, "--estimator", "naive",
                 "--out", out]) == 1
    assert "error: usage:" in capsys.readouterr().err
    # unknown estimator
    assert main(["fit", "--input", data_csv, "--estimator", "spline",
                 "--h", "0.5", "--out", out]) == 1
    # ce without a seed
    assert main(["fit", "--input", data_csv, "--estimator", "ce",
                 "--family", "gaussian", "--sigma-u", "0.4",
                 "--h", "0.5", "--out", out]) == 1
    assert "--seed" in capsys.readouterr().err


def test_missing_input_is_a_data_error(tmp_path, capsys):
    code = main(["fit", "--input", str(tmp_path / "absent.csv"),
                 "--estimator", "naive", "--h", "0.5",
                 "--out", str(tmp_path / "run")])
    assert code == 2
    assert capsys.readouterr().err.startswith("error: data:")


def test_na_rows_warn_on_stderr(tmp_path, capsys):
    path = tmp_path / "holes.csv"
    rows = "\n".join(f"0.{k},1.{k}" for k in range(1, 8))
    path.write_text(f"theta,w\n{rows}\nna,9.9\n")
    code = main(["fit", "--input", str(path), "--estimator", "naive",
                 "--h", "0.8", "--out", str(tmp_path / "run")])
    assert code == 0
    err = capsys.readouterr().err
    assert "WARN na-rows: dropped 1 row(s)" in err
    assert "9" in err  # the offending file line


def test_dk_without_error_writes_the_naive_file(tmp_path, data_csv):
    a = tmp_path / "a"
    b = tmp_path / "b"
    main(["fit", "--input", data_csv, "--estimator", "naive",
          "--h", "0.6", "--out", str(a)])
    main(["fit", "--input", data_csv, "--estimator", "dk",
          "--h", "0.6", "--out", str(b)])
    assert (a / "fit.csv").read_bytes() == (b / "fit.csv").read_bytes()


def test_select_h_writes_report(tmp_path, data_csv, capsys):
    out = tmp_path / "sel"
    code = main([
        "select-h", "--input", data_csv, "--estimator", "dk",
        "--family", "gaussian", "--sigma-u", "0.5", "--selector", "cv",
        "--count", "4", "--folds", "3", "--seed", "5", "--out", str(out),
    ])
    assert code == 0
    captured = capsys.readouterr()
    assert "select-h: selector=naive-cv" in captured.out
    lines = (out / "bandwidth.csv").read_text().splitlines()
    assert lines[0] == "candidate,loss"
    assert len(lines) == 5
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["command"] == "select-h"
    assert doc["seed"] == 5


def test_select_h_two_candidates_always_warn_boundary(tmp_path, data_csv, capsys):
    code = main([
        "select-h", "--input", data_csv, "--estimator", "naive",
        "--selector", "cv", "--count", "2", "--folds", "3",
        "--seed", "5", "--out", str(tmp_path / "sel"),
    ])
    assert code == 0
    assert "WARN boundary:" in capsys.readouterr().err


def test_select_h_requires_seed(tmp_path, data_csv):
    assert main([
        "select-h", "--input", data_csv, "--estimator", "naive",
        "--selector", "cv", "--out", str(tmp_path / "sel"),
    ]) == 1


def test_simulate_smoke_preset(tmp_path, capsys):
    out = tmp_path / "sim"
    code = main(["simulate", "--preset", "smoke-desk", "--seed", "3",
                 "--out", str(out)])
    assert code == 0
    captured = capsys.readouterr()
    assert "simulate: wrote" in captured.out
    header = (out / "records.csv").read_text().splitlines()[0]
    assert header.split(",")[:4] == ["scenario", "procedure", "replicate", "risk"]
    assert (out / "fitted.csv").exists()
    assert json.loads((out / "manifest.json").read_text())["command"] == "simulate"


def test_simulate_unknown_preset(tmp_path, capsys):
    code = main(["simulate", "--preset", "galaxy-desk", "--seed", "3",
                 "--out", str(tmp_path / "sim")])
    assert code == 1
    assert "smoke-desk" in capsys.readouterr().err  # lists what exists


def test_contaminate_hits_target(tmp_path, data_csv, capsys):
    out = tmp_path / "cont"
    code = main(["contaminate", "--input", data_csv,
                 "--target-reliability", "0.9", "--seed", "11",
                 "--out", str(out)])
    assert code == 0
    assert "achieved reliability 0.9000" in capsys.readouterr().out
    ds, _ = load_dataset(out / "contaminated.csv")
    assert ds.x is not None
    lam = np.var(ds.x, ddof=1) / np.var(ds.w, ddof=1)
    assert abs(lam - 0.9) < 1e-3


def test_contaminate_deterministic(tmp_path, data_csv):
    a = tmp_path / "a"
    b = tmp_path / "b"
    args = ["contaminate", "--input", data_csv, "--sigma-u", "0.7",
            "--family", "laplace", "--seed", "11"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    assert (a / "contaminated.csv").read_bytes() == (b / "contaminated.csv").read_bytes()


def test_contaminate_perfect_reliability_is_noise_free(tmp_path, data_csv):
    out = tmp_path / "cont"
    main(["contaminate", "--input", data_csv, "--target-reliability", "1.0",
          "--seed", "11", "--out", str(out)])
    ds, _ = load_dataset(out / "contaminated.csv")
    assert np.array_equal(ds.w, ds.x)


def test_contaminate_argument_errors(tmp_path, data_csv, capsys):
    out = str(tmp_path / "cont")
    # both noise arguments
    assert main(["contaminate", "--input", data_csv, "--sigma-u", "0.5",
                 "--target-reliability", "0.9", "--seed", "1",
                 "--out", out]) == 1
    # reliability out of range
    assert main(["contaminate", "--input", data_csv,
                 "--target-reliability", "1.2", "--seed", "1",
                 "--out", out]) == 1
    # no x column
    bare = tmp_path / "bare.csv"
    bare.write_text("theta,w\n" + "\n".join(f"0.{k},{k}.0" for k in range(1, 7)) + "\n")
    assert main(["contaminate", "--input", str(bare), "--sigma-u", "0.5",
                 "--seed", "1", "--out", out]) == 2


def test_sensitivity_scan(tmp_path, data_csv, capsys):
    out = tmp_path / "scan"
    code = main([
        "sensitivity", "--input", data_csv, "--h", "0.7",
        "--lambdas", "0.8,0.9", "--families", "gaussian,laplace",
        "--estimators", "naive,dk", "--grid=-2:2:20",
        "--seed", "21", "--out", str(out),
    ])
    assert code == 0
    assert "sensitivity: wrote 8 of 8" in capsys.readouterr().out
    files = sorted(p.name for p in out.iterdir())
    assert "fit_lam0.8_gaussian_naive.csv" in files
    assert "fit_lam0.9_laplace_dk.csv" in files
    assert len([f for f in files if f.startswith("fit_")]) == 8
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["parameters"]["failures"] == []


def test_sensitivity_validates_before_writing(tmp_path, data_csv):
    out = tmp_path / "scan"
    code = main([
        "sensitivity", "--input", data_csv, "--h", "0.7",
        "--lambdas", "0.8,1.5", "--seed", "21", "--out", str(out),
    ])
    assert code == 1
    assert not out.exists() or not any(out.iterdir())


def test_config_file_merges_and_flags_win(tmp_path, data_csv, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "estimator=naive\n"
        "selector=cv\n"
        "count=4\n"
        "folds=3\n"
        "seed=5\n"
    )
    out = tmp_path / "sel"
    code = main(["select-h", "--input", data_csv, "--config", str(cfg),
                 "--count", "3", "--out", str(out)])
    assert code == 0
    lines = (out / "bandwidth.csv").read_text().splitlines()
    assert len(lines) == 4  # the command-line count of 3 wins over the file


def test_config_rejects_unknown_keys(tmp_path, data_csv, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bandwidth=0.5\n")
    code = main(["fit", "--input", data_csv, "--config", str(cfg),
                 "--estimator", "naive", "--h", "0.5",
                 "--out", str(tmp_path / "run")])
    assert code == 1
    assert "unknown config key" in capsys.readouterr().err


def test_no_command_is_a_usage_error(capsys):
    assert main([]) == 1
    assert "error: usage:" in capsys.readouterr().err
