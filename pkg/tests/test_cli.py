from pathlib import Path

import numpy as np
from typer.testing import CliRunner

from slotshare.cli import app
from slotshare.config import load_config
from slotshare.neuralnet import BranchingDuelingNet, save_snapshot
from slotshare.policy import encoded_size

SMALL = "n_rbs = 2\nk_max = 3\nn_users = 3\nhorizon = 60\nlstm_hidden = 8\nvalue_hidden = 4\nminibatch = 8\n"


def test_cli_scenarios_lists():
    runner = CliRunner()
    result = runner.invoke(app, ["scenarios"])
    assert result.exit_code == 0
    assert "fixed_5_2" in result.stdout
    assert "rate_trace_5" in result.stdout


def test_cli_init_config(tmp_path: Path):
    out = tmp_path / "cfg.toml"
    runner = CliRunner()
    result = runner.invoke(app, ["init-config", "--preset", "dynamic_2", "--out", str(out)])
    assert result.exit_code == 0
    cfg = load_config(out)
    assert cfg.scenario == "dynamic"
    assert cfg.n_rbs == 2

    result = runner.invoke(app, ["init-config", "--preset", "missing", "--out", str(out)])
    assert result.exit_code == 2


def test_cli_run_and_summarize(tmp_path: Path):
    config = tmp_path / "run.toml"
    config.write_text(SMALL)
    out = tmp_path / "out"
    runner = CliRunner()
    result = runner.invoke(app, ["run", "--config", str(config), "--out", str(out), "--seed", "4", "--sequential"])
    assert result.exit_code == 0, result.output
    for name in ("slots.csv", "users.csv", "summary.csv", "decisions.csv", "summary.json", "summary.md"):
        assert (out / name).exists()

    result = runner.invoke(app, ["summarize", str(out)])
    assert result.exit_code == 0
    assert "Run Summary" in result.stdout
    assert "seed 4" in result.stdout


def test_cli_run_baseline_override(tmp_path: Path):
    config = tmp_path / "run.toml"
    config.write_text(SMALL)
    out = tmp_path / "out"
    result = CliRunner().invoke(app, ["run", "--config", str(config), "--out", str(out), "--baseline", "pf"])
    assert result.exit_code == 0, result.output
    assert "sum_throughput=2" in result.stdout


def test_cli_config_error_exit_code(tmp_path: Path):
    config = tmp_path / "run.toml"
    config.write_text("n_rbs = 2\ntau = 1.5\n")
    result = CliRunner().invoke(app, ["run", "--config", str(config)])
    assert result.exit_code == 2

    config.write_text(SMALL)
    result = CliRunner().invoke(app, ["run", "--config", str(config), "--scenario", "bursty"])
    assert result.exit_code == 2


def test_cli_numeric_failure_exit_code(tmp_path: Path):
    net = BranchingDuelingNet(encoded_size(2, 3), 2, 3, lstm_hidden=8, value_hidden=4, seed=0)
    net.head.params["ba"][...] = np.nan
    snapshot = tmp_path / "broken.npz"
    save_snapshot(net, snapshot)
    config = tmp_path / "run.toml"
    config.write_text(SMALL + f'warm_start = "{snapshot}"\n')
    result = CliRunner().invoke(app, ["run", "--config", str(config), "--out", str(tmp_path / "out")])
    assert result.exit_code == 3


def test_cli_summarize_missing_directory(tmp_path: Path):
    result = CliRunner().invoke(app, ["summarize", str(tmp_path / "nothing")])
    assert result.exit_code == 1


def test_cli_input_errors_exit_with_config_code(tmp_path: Path):
    bad_trace = tmp_path / "bad.csv"
    bad_trace.write_text("user_id,t,x,y\n1,1,0.0,0.0\n1,x,0.0,0.0\n")
    cases = {
        "geometry": SMALL + "cell_radius = 100.0\nmin_distance = 200.0\n",
        "missing_trace": SMALL + f'scenario = "rate"\ntrace_path = "{tmp_path / "nope.csv"}"\n',
        "malformed_trace": SMALL + f'scenario = "rate"\ntrace_path = "{bad_trace}"\n',
        "missing_snapshot": SMALL + f'warm_start = "{tmp_path / "nope.npz"}"\n',
    }
    for name, text in cases.items():
        config = tmp_path / f"{name}.toml"
        config.write_text(text)
        result = CliRunner().invoke(app, ["run", "--config", str(config), "--out", str(tmp_path / name)])
        assert result.exit_code == 2, name
