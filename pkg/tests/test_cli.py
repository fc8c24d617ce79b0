from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from nlbs.cli import main

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def read_csv(path):
    meta, rows = {}, []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, value = line[2:].split("=", 1)
            meta[key] = value
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = np.array([[float(x) for x in row] for row in reader])
    return meta, header, rows


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_fig1_surface(tmp_path, capsys):
    assert main(["closed-form", "--scenario", str(SCENARIOS / "fig1.cfg"), "--out", str(tmp_path)]) == 0
    meta, header, rows = read_csv(tmp_path / "fig1_surface.csv")
    assert header == ["S", "t", "u"]
    assert meta["closed_form.m"] == "0.5" and meta["market.sigma"] == "0.35" and meta["market.rho"] == "0.1"
    S, t = rows[:, 0], rows[:, 1]
    assert 0 < S.min() and S.max() == 2.0 and t.min() == 0.0 and t.max() == 1.0
    assert rows.shape == (100 * 21, 3)
    assert "wrote" in capsys.readouterr().out


def test_output_is_bit_identical_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["price", "--scenario", str(SCENARIOS / "fig6.cfg"), "--out", str(out)]) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files and files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweep_writes_one_file_per_value(tmp_path):
    assert main(["price", "--scenario", str(SCENARIOS / "fig9.cfg"), "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig9_rho0.05_slice.csv", "fig9_rho0.1_slice.csv", "fig9_rho0.2_slice.csv"]
    meta, _, rows = read_csv(tmp_path / "fig9_rho0.2_slice.csv")
    assert meta["market.rho"] == "0.2" and meta["scheme"] == "implicit"
    assert np.all(rows[:, 1] == 0.0) and rows.shape[0] == 61


def test_explicit_run_reports_divergence_flag(tmp_path):
    assert main(["price", "--scenario", str(SCENARIOS / "explicit_benchmark.cfg"), "--out", str(tmp_path)]) == 0
    meta, _, _ = read_csv(tmp_path / "explicit_benchmark_slice.csv")
    assert meta["diverged"] in ("true", "false")
    assert "mesh_ratio" in meta


def test_diverged_explicit_run_exits_zero(tmp_path):
    text = (SCENARIOS / "explicit_benchmark.cfg").read_text() + "solver.divergence_factor = 1.0\n"
    path = write(tmp_path, "diverging.cfg", text.replace("name = explicit_benchmark", "name = diverging"))
    assert main(["price", "--scenario", str(path), "--out", str(tmp_path)]) == 0
    meta, _, _ = read_csv(tmp_path / "diverging_slice.csv")
    assert meta["diverged"] == "true"


def test_benchmark_no_convergence_exit_code(tmp_path, capsys):
    assert main(["price", "--scenario", str(SCENARIOS / "benchmark.cfg"), "--out", str(tmp_path)]) == 3
    assert "NoConvergence at layer" in capsys.readouterr().err


def test_invalid_scenario_exit_code(tmp_path, capsys):
    path = write(tmp_path, "bad.cfg", "method = implicit\nmarket.sigma = 0.35\nmarket.rho = 0\n")
    assert main(["price", "--scenario", str(path), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_greeks_apply_the_vega_sign(tmp_path):
    assert main(["greeks", "--scenario", str(SCENARIOS / "fig5.cfg"), "--out", str(tmp_path)]) == 0
    meta, header, rows = read_csv(tmp_path / "fig5_greeks.csv")
    assert header == ["S", "t", "delta", "gamma", "theta", "vega"]
    assert meta["vega_sign"] == "-1" and meta["vega_convention"] == "vega=-du/dsigma"
    assert np.all(np.isfinite(rows))
    from nlbs.closed_form import ClosedFormParams, family_surface, greeks
    from nlbs.model import MarketParams

    S, t = rows[5:8, 0], rows[5:8, 1]
    g = greeks(family_surface(ClosedFormParams(0.5)), S, t, MarketParams(0.35, 1.0))
    assert rows[5:8, 5] == pytest.approx(-g["vega"] + 0.0)


def test_compare_writes_both_series(tmp_path):
    assert main(["compare", "--scenario", str(SCENARIOS / "fig8.cfg"), "--out", str(tmp_path)]) == 0
    paths = sorted(tmp_path.glob("fig8_*_compare.csv"))
    assert len(paths) == 3
    meta, header, rows = read_csv(paths[0])
    assert header == ["S", "t", "u_nonlinear", "u_linear", "difference"]
    assert rows[:, 4] == pytest.approx(rows[:, 2] - rows[:, 3])
    assert meta["linear_reference"] == "linear-fd"


def test_validate_single_check_and_unknown(tmp_path, capsys):
    assert main(["validate", "--check", "ode_chain", "--out", str(tmp_path)]) == 0
    report = (tmp_path / "validation_report.txt").read_text().splitlines()
    assert len(report) == 1 and report[0].startswith("check=ode_chain status=pass ")
    assert main(["validate", "--check", "no_such_check", "--out", str(tmp_path)]) == 2
    assert "unknown check" in capsys.readouterr().err


def test_validate_strict_reports_failures(tmp_path):
    assert main(["validate", "--check", "benchmark_accuracy", "--strict", "--out", str(tmp_path)]) == 1
    assert main(["validate", "--check", "ode_chain,group_action", "--strict", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "validation_report.txt").read_text().splitlines()) == 2


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NLBS_OUT_DIR", str(tmp_path / "env"))
    assert main(["closed-form", "--scenario", str(SCENARIOS / "fig1.cfg")]) == 0
    assert (tmp_path / "env" / "fig1_surface.csv").exists()


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name in ("price", "closed-form", "greeks", "validate", "compare", "NLBS_OUT_DIR"):
        assert name in out
