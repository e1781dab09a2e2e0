import subprocess
import sys

import pytest

from sidebalance import cli
from sidebalance.scenarios import read_csv


def test_design_prints_constants(capsys):
    assert cli.main(["design", "--scenario", "1"]) == 0
    out = capsys.readouterr().out
    for key in ("delta", "b_lin", "K_e", "A_m", "B_m", "P", "ideal K_x", "ideal K_r"):
        assert key in out
    assert "1.62346212" in out and "-23.14573499" in out and "21.7965086997" in out


def test_run_writes_csv(tmp_path, capsys):
    assert cli.main(["run", "--scenario", "3", "--out", str(tmp_path), "--duration", "2"]) == 0
    data = read_csv(tmp_path / "scenario3_sequential.csv")
    assert len(data["t"]) == 201
    assert "status" in capsys.readouterr().out


def test_run_with_config_and_dt(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[physical]\nb_true = 8\n")
    assert cli.main(["run", "--scenario", "1", "--config", str(cfg), "--out", str(tmp_path),
                     "--dt", "0.02", "--duration", "1"]) == 0
    assert len(read_csv(tmp_path / "scenario1_sequential.csv")["t"]) == 51


def test_run_bad_config_exits_1(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[sim]\ndt = -1\n")
    assert cli.main(["run", "--scenario", "1", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "sim.dt" in capsys.readouterr().err


def test_run_coupled_failure_exits_1(tmp_path):
    assert cli.main(["run", "--scenario", "1", "--mode", "coupled", "--out", str(tmp_path)]) == 1
    assert (tmp_path / "scenario1_coupled.csv").exists()


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "1", "--bogus"],
    ["run"],
    ["run", "--scenario", "9"],
    ["design"],
    ["frobnicate"],
    ["check", "--only", "12"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_check_subset(capsys):
    assert cli.main(["check", "--only", "1", "6", "10"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 3


def test_check_flip_gamma_r_fails(capsys):
    assert cli.main(["check", "--flip-gamma-r", "--only", "5"]) == 1
    assert "[FAIL]  5." in capsys.readouterr().out


def test_check_reduced_duration_not_settled(capsys):
    assert cli.main(["check", "--duration", "0.1", "--only", "3"]) == 1
    assert "not settled" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sidebalance", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage:" in proc.stderr
