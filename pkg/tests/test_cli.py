import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from main import app

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


def test_trajectory_csv(tmp_path):
    output = tmp_path / "traj.csv"
    result = invoke("trajectory", "--model", "avg-ex", "--scheme", "ap-avg", "--dt", 0.004,
                    "--eps", 0.001, "--T", 1, "--seed", 0, "--output", output)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["t", "x_0", "m"]
    assert len(frame) == 251
    assert frame["x_0"].iloc[0] == 1.0
    assert frame["t"].iloc[-1] == pytest.approx(1.0)


def test_trajectory_every_and_mean_band(tmp_path):
    output = tmp_path / "traj.csv"
    result = invoke("trajectory", "--model", "diff-ex2", "--scheme", "ap-diff", "--dt", 0.01,
                    "--eps", 0.1, "--T", 0.5, "--every", 10, "--samples", 20, "--output", output)
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(output)) == 6
    band = pd.read_csv(tmp_path / "traj_mean.csv")
    assert list(band.columns) == ["t", "scheme", "mean", "std_error"]
    assert len(band) == 6


def test_preset_writes_one_file_per_scheme(tmp_path):
    output = tmp_path / "fig.csv"
    result = invoke("trajectory", "--preset", "fig-diff2", "--T", 0.1, "--output", output)
    assert result.exit_code == 0, result.output
    for label in ("ap-diff", "crude-diff", "ref-diff"):
        frame = pd.read_csv(tmp_path / f"fig_{label}.csv")
        assert len(frame) == 26


def test_config_file_with_override(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"model": "avg-ex", "scheme": "crude-avg", "dt": 0.1, "eps": 0.5, "T": 1}))
    output = tmp_path / "traj.csv"
    result = invoke("trajectory", "--config", config, "--dt", 0.05, "--output", output)
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(output)) == 21


def test_weak_error_is_reproducible(tmp_path):
    outputs = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for output in outputs:
        result = invoke("weak-error", "--model", "avg-ex", "--scheme", "ap-avg", "--dt-grid", "0.25,0.125",
                        "--eps", 1.0, "--samples", 100, "--seed", 7, "--output", output)
        assert result.exit_code == 0, result.output
    assert outputs[0].read_bytes() == outputs[1].read_bytes()
    frame = pd.read_csv(outputs[0])
    assert list(frame.columns) == ["dt", "eps", "scheme", "estimate", "std_error", "error", "error_std", "samples"]
    assert len(frame) == 2
    summary = json.loads((tmp_path / "a.csv.summary.json").read_text())
    assert summary["model"] == "avg-ex"
    assert "autorreferencia" in summary["reference"]


def test_sweep_requires_eps_grid(tmp_path):
    result = invoke("sweep", "--model", "avg-ex", "--scheme", "ap-avg", "--eps-grid", "",
                    "--output", tmp_path / "s.csv")
    assert result.exit_code == 2
    assert not (tmp_path / "s.csv").exists()


def test_sweep_table(tmp_path):
    output = tmp_path / "s.csv"
    result = invoke("sweep", "--model", "avg-ex", "--scheme", "ap-avg,ref-avg", "--dt-grid", "0.5,0.25",
                    "--eps-grid", "1,0.5", "--samples", 100, "--output", output)
    assert result.exit_code == 0, result.output
    assert len(pd.read_csv(output)) == 4


def test_invalid_configurations_exit_with_2(tmp_path):
    output = tmp_path / "x.csv"
    cases = [
        ("trajectory", "--model", "nope", "--scheme", "ap-avg", "--dt", 0.1, "--eps", 0.1),
        ("trajectory", "--model", "avg-ex", "--scheme", "ap-diff", "--dt", 0.1, "--eps", 0.1),
        ("trajectory", "--model", "avg-ex", "--scheme", "ap-avg", "--dt", 0.3, "--eps", 0.1),
        ("weak-error", "--model", "avg-ex", "--scheme", "ap-avg", "--dt-grid", "0.1,0.2", "--eps", 0.1),
        ("weak-error", "--model", "avg-ex", "--scheme", "ap-avg", "--eps", 0.1, "--samples", 10),
        ("generator-gap", "--model", "avg-ex", "--eps-grid", "0.5"),
    ]
    for case in cases:
        result = invoke(*case, "--output", output)
        assert result.exit_code == 2, (case, result.output)


def test_limit_gap_csv(tmp_path):
    output = tmp_path / "gap.csv"
    result = invoke("limit-gap", "--model", "avg-ex", "--scheme", "ap-avg", "--dt", 0.0625, "--T", 0.25,
                    "--eps-grid", "0.01,0.005", "--samples", 50, "--output", output)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["eps", "gap", "gap_std"]
    assert len(frame) == 2


def test_numerical_failure_exits_with_3(tmp_path):
    result = invoke("limit-gap", "--model", "diff-ex1-line", "--scheme", "naive-exp-ou-ex1bis,limit-ex1bis",
                    "--dt", 0.5, "--T", 1, "--eps", 0.0001, "--samples", 200, "--output", tmp_path / "gap.csv")
    assert result.exit_code == 3


def test_generator_gap_csv(tmp_path):
    output = tmp_path / "gen.csv"
    result = invoke("generator-gap", "--model", "diff-ex2", "--eps-grid", "0.5,0.25", "--output", output)
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["eps", "max_normalized_gap"]
    assert len(frame) == 2
