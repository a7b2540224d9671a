import json

import pytest

from savgrasp import __version__
from savgrasp.cli import main

HOVER = """
schema = 1
name = "cli-hover"
controller = "pid"
duration = 1.0
[initial]
position = [0.0, 0.0, 1.0]
"""


@pytest.fixture
def hover_file(tmp_path):
    p = tmp_path / "hover.toml"
    p.write_text(HOVER)
    return p


def test_version(capsys):
    assert main(["version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_simulate(tmp_path, hover_file):
    out = tmp_path / "out"
    assert main(["simulate", "--scenario", str(hover_file), "--out", str(out), "--seed", "2"]) == 0
    metrics = json.loads((out / "cli-hover_pid_metrics.json").read_text())
    assert metrics["fault"] is None and max(metrics["metrics"]["rmse"]) < 0.02


def test_simulate_bad_config_exit_2(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("schema = 9")
    assert main(["simulate", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--scenario", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 2


def test_simulate_fault_exit_1(tmp_path):
    p = tmp_path / "wind.toml"
    p.write_text(HOVER + '[[events]]\nt = 0.2\ntype = "wind"\naccel = [30.0, 0.0, 0.0]\n')
    assert main(["simulate", "--scenario", str(p), "--out", str(tmp_path)]) == 1


def test_compare(tmp_path, hover_file, capsys):
    out = tmp_path / "cmp"
    assert main(["compare", "--scenario", str(hover_file), "--controllers", "pid,dompc", "--out", str(out)]) == 0
    assert (out / "comparison.csv").exists()
    assert "dompc" in capsys.readouterr().out
    assert main(["compare", "--scenario", str(hover_file), "--controllers", "pid,lqr", "--out", str(out)]) == 2


def test_qp_selftest(capsys):
    assert main(["qp-selftest", "--count", "20"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_sysid_default_step_test(capsys):
    assert main(["sysid"]) == 0
    assert "tau_phi" in capsys.readouterr().out


def test_sysid_rejects_unexcited_log(tmp_path, hover_file):
    out = tmp_path / "out"
    main(["simulate", "--scenario", str(hover_file), "--out", str(out)])
    assert main(["sysid", "--log", str(out / "cli-hover_pid.csv")]) == 1
