import csv
import json
import os
import warnings

import numpy as np
import pytest

from koopinn.cli import (correlations_by_power, main, pearson,
                         read_scatter_csv, validate_manifest, write_manifest,
                         write_correlations)
from koopinn.config import save_config
from koopinn.training import TrainConfig

TINY = dict(operator="gradient-sum", mode="vpinn", steps=2, width=4,
            hidden_layers=1, n_collocation=5, n_test=5, grid_nodes=(8, 8),
            bump_c=1.0, n_boundary=8, log_every=1)


def write_cfg(tmp_path, name="cfg.ini", **kw):
    merged = {**TINY, **kw}
    path = tmp_path / name
    save_config(TrainConfig(**merged), path)
    return str(path)


def test_pearson_exact_values():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)


def test_pearson_validation():
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        pearson([1], [2])
    with pytest.raises(ValueError):
        pearson([1, 2, 3], [5, 5, 5])


def test_correlations_by_power_cubic_target():
    xs = [1.0, 2.0, 3.0, 4.0, 5.0]
    ys = [x ** 3 for x in xs]
    rows = correlations_by_power(xs, ys)
    assert [r for r, _ in rows] == [1, 2, 3]
    assert rows[2][1] == pytest.approx(1.0, abs=1e-12)
    assert rows[0][1] < rows[1][1] < rows[2][1]


def test_correlations_csv_roundtrip(tmp_path):
    path = tmp_path / "corr.csv"
    write_correlations(path, [(1, 0.5), (2, 0.75)])
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["r"] for r in rows] == ["1", "2"]
    assert float(rows[1]["pearson"]) == 0.75


def test_read_scatter_csv_validation(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("factor_sum,test_error\n")
    with pytest.raises(ValueError, match="no data rows"):
        read_scatter_csv(empty)
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="missing column"):
        read_scatter_csv(wrong)


def test_manifest_roundtrip(tmp_path):
    (tmp_path / "a.csv").write_text("x\n")
    write_manifest(str(tmp_path), "train", TrainConfig(**TINY), [0], ["a.csv"])
    doc = validate_manifest(str(tmp_path))
    assert doc["command"] == "train"
    assert doc["files"] == ["a.csv"]
    assert "config_hash" in doc
    os.remove(tmp_path / "a.csv")
    with pytest.raises(FileNotFoundError):
        validate_manifest(str(tmp_path))


def test_main_reports_errors_on_stderr(capsys):
    code = main(["bound"])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_train_command_end_to_end(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path)
    out = tmp_path / "run"
    assert main(["train", "--config", cfg_path, "--out", str(out)]) == 0
    for name in ("train_log.csv", "config.ini", "snapshot.json",
                 "bound.json", "manifest.json"):
        assert (out / name).exists()
    validate_manifest(str(out))
    stdout = capsys.readouterr().out
    assert "status ok" in stdout and "final test loss" in stdout
    with open(out / "train_log.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["step"] for r in rows] == ["0", "1", "2"]


def test_train_command_seed_override(tmp_path):
    cfg_path = write_cfg(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["train", "--config", cfg_path, "--out", str(a), "--seed", "0"])
    main(["train", "--config", cfg_path, "--out", str(b), "--seed", "1"])
    la = (a / "train_log.csv").read_text()
    lb = (b / "train_log.csv").read_text()
    assert la != lb
    c = tmp_path / "c"
    main(["train", "--config", cfg_path, "--out", str(c), "--seed", "0"])
    assert (c / "train_log.csv").read_text() == la


def test_train_command_aborted_exit_code(tmp_path):
    cfg_path = write_cfg(tmp_path, operator="navier-stokes", mode="pinn",
                         lr=1e200, steps=6, grid_nodes=(5, 5),
                         regularize=False)
    with np.errstate(all="ignore"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            code = main(["train", "--config", cfg_path,
                         "--out", str(tmp_path / "x")])
    assert code == 3


def test_bound_command_reads_snapshot(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path)
    run = tmp_path / "run"
    main(["train", "--config", cfg_path, "--out", str(run)])
    capsys.readouterr()
    out = tmp_path / "factors"
    code = main(["bound", "--snapshot", str(run / "snapshot.json"),
                 "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "factor sum" in stdout and "norm proxy" in stdout
    with open(out / "factors.json") as fh:
        doc = json.load(fh)
    assert set(doc) >= {"norm_proxy", "factor_sum", "layers"}
    assert len(doc["layers"]) == 2


def test_correlate_command(tmp_path, capsys):
    scatter = tmp_path / "scatter.csv"
    scatter.write_text("width,steps,factor_sum,test_error\n"
                       "4,100,1.0,1.0\n4,200,2.0,8.0\n4,300,3.0,27.0\n")
    out = tmp_path / "corr"
    assert main(["correlate", "--scatter", str(scatter),
                 "--out", str(out)]) == 0
    assert "r=3" in capsys.readouterr().out
    with open(out / "correlations.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert float(rows[2]["pearson"]) == pytest.approx(1.0, abs=1e-12)
    validate_manifest(str(out))


def test_verify_command_reduced(tmp_path, capsys):
    out = tmp_path / "audit"
    code = main(["verify", "--draws", "300", "--family", "10",
                 "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "all audits passed" in stdout
    assert stdout.count("PASS") >= 6
    with open(out / "audit_report.json") as fh:
        assert json.load(fh)["passed"] is True


def test_reproduce_ns_command_tiny(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path, operator="navier-stokes")
    out = tmp_path / "ns"
    assert main(["reproduce-ns", "--config", cfg_path,
                 "--out", str(out)]) == 0
    doc = validate_manifest(str(out))
    assert len(doc["runs"]) == 12
    with open(out / "ns_summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert {(r["mode"], r["regularized"]) for r in rows} == {
        ("vpinn", "on"), ("vpinn", "off"), ("pinn", "on"), ("pinn", "off")}
    assert all(r["n_runs"] == "3" for r in rows)
    assert "reg-off mean" in capsys.readouterr().out


def test_reproduce_pma_command_tiny(tmp_path, capsys):
    cfg_path = write_cfg(tmp_path, operator="parabolic-monge-ampere",
                         mode="pinn", grid_nodes=(6, 6, 6))
    out = tmp_path / "pma"
    assert main(["reproduce-pma", "--config", cfg_path, "--out", str(out),
                 "--widths", "4", "--steps-list", "2,3"]) == 0
    validate_manifest(str(out))
    with open(out / "pma_runs.csv", newline="") as fh:
        runs = list(csv.DictReader(fh))
    assert len(runs) == 6
    assert all(r["status"] == "ok" for r in runs)
    with open(out / "pma_scatter.csv", newline="") as fh:
        scatter = list(csv.DictReader(fh))
    assert len(scatter) == 2
    with open(out / "pma_correlations.csv", newline="") as fh:
        corr = list(csv.DictReader(fh))
    assert [r["r"] for r in corr] == ["1", "2", "3"]
    assert "pearson" in capsys.readouterr().out
