"""命令行入口：退出码、输出文件与可复现性"""
import json

import pandas as pd
import pytest

import main
from tools.file_tools import read_json
from utils.errors import ConvergenceError

SMALL_SCENARIO = {
    "n_states": 4,
    "first_year": 2010,
    "n_years": 3,
    "never_treated": 1,
    "couples_per_cell": 25,
}


def write_config(path, data: dict) -> str:
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


# ============================================================
# 退出码
# ============================================================


def test_unknown_command_is_usage_error():
    assert main.run(["calibrate"]) == 1


def test_help_exits_cleanly(capsys):
    assert main.run(["--help"]) == 0
    assert "solve" in capsys.readouterr().out


@pytest.mark.parametrize("data", [
    {"model": {"params": {"eta": -1.0}}},
    {"modle": {}},
    {"pipeline": {"placebo_reps": 20}},
    {"shock": {"target_effect": 0.01, "post_value": 0.1}},
])
def test_invalid_config_exit_code(tmp_path, capsys, data):
    config = write_config(tmp_path / "bad.json", data)
    assert main.run(["solve", "--config", config, "--out", str(tmp_path / "out")]) == 1
    assert "配置校验失败" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main.run(["solve", "--config", str(tmp_path / "absent.json")]) == 1


def test_estimate_without_panel(tmp_path):
    assert main.run(["estimate", "--out", str(tmp_path)]) == 1


def test_convergence_failure_exit_code(tmp_path, monkeypatch):
    def failing(config, out_dir):
        raise ConvergenceError("未收敛", residual=1.0, iterations=10)

    monkeypatch.setattr(main, "dispatch", lambda command: failing)
    assert main.run(["solve", "--out", str(tmp_path)]) == 2


# ============================================================
# 输出
# ============================================================


def test_solve_outputs_and_rerun(tmp_path):
    first = tmp_path / "first"
    assert main.run(["solve", "--out", str(first), "--jobs", "1"]) == 0
    for name in ("equilibrium.json", "equilibrium.csv", "config.json", "manifest.json"):
        assert (first / name).exists()
    manifest = read_json("manifest.json", str(first))
    assert manifest["command"] == "solve"
    assert manifest["files"] == ["config.json", "equilibrium.csv", "equilibrium.json"]

    second = tmp_path / "second"
    assert main.run(["solve", "--config", str(first / "config.json"), "--out", str(second)]) == 0
    assert (first / "equilibrium.json").read_bytes() == (second / "equilibrium.json").read_bytes()
    assert (first / "manifest.json").read_bytes() == (second / "manifest.json").read_bytes()


def test_verify_grid_order_does_not_matter(tmp_path):
    grids = {"d_grid": [0.0, 0.1, 0.2], "lambda_g_grid": [0.5, 1.0, 1.5], "plot": True}
    reversed_grids = {**grids, "d_grid": [0.2, 0.1, 0.0], "lambda_g_grid": [1.5, 1.0, 0.5]}
    verdicts = []
    for name, verify in (("forward", grids), ("reversed", reversed_grids)):
        config = write_config(tmp_path / f"{name}.json", {"verify": verify, "jobs": 1})
        assert main.run(["verify", "--config", config, "--out", str(tmp_path / name)]) == 0
        verdicts.append(read_json("verify.json", str(tmp_path / name))["propositions"])
    assert verdicts[0] == verdicts[1]
    assert all(entry["passed"] for entry in verdicts[0].values())
    assert (tmp_path / "forward" / "verify_d.png").exists()


def test_gen_panel_then_estimate(tmp_path):
    config = write_config(tmp_path / "panel.json", {
        "shock": {"post_value": 0.0},
        "scenario": SMALL_SCENARIO,
        "seed": 3,
        "jobs": 1,
    })
    panel_dir = tmp_path / "panel"
    assert main.run(["gen-panel", "--config", config, "--out", str(panel_dir)]) == 0
    panel = pd.read_csv(panel_dir / "panel.csv")
    assert len(panel) == 4 * 3 * 25

    estimate_config = write_config(tmp_path / "estimate.json", {
        "panel_path": str(panel_dir / "panel.csv"),
        "regression": {"outcome": "both_working"},
    })
    estimate_dir = tmp_path / "estimate"
    assert main.run(["estimate", "--config", estimate_config, "--out", str(estimate_dir)]) == 0
    result = read_json("estimate.json", str(estimate_dir))
    assert [row["name"] for row in result["coefficients"]] == ["const", "ssm"]
    assert result["n_clusters"] == 4


def test_estimate_on_foreign_csv(tmp_path):
    frame = pd.DataFrame({
        "state_id": [1, 1, 2, 2] * 2,
        "year": [2010, 2011] * 4,
        "ssm": [0, 0, 0, 1] * 2,
        "y": [1.0, 2.0, 1.0, 3.0, 1.1, 2.1, 1.0, 3.0],
    })
    frame.to_csv(tmp_path / "toy.csv", index=False)
    config = write_config(tmp_path / "toy.json", {
        "panel_path": str(tmp_path / "toy.csv"),
        "regression": {"outcome": "y"},
    })
    assert main.run(["estimate", "--config", config, "--out", str(tmp_path / "out")]) == 0

    missing = write_config(tmp_path / "missing.json", {
        "panel_path": str(tmp_path / "toy.csv"),
        "regression": {"outcome": "hours_total"},
    })
    assert main.run(["estimate", "--config", missing, "--out", str(tmp_path / "out2")]) == 3


def test_treatment_year_outside_window_fails_before_any_stage(tmp_path, capsys):
    config = write_config(tmp_path / "pipeline.json", {
        "shock": {"target_effect": 0.002},
        "scenario": {**SMALL_SCENARIO, "n_states": 3, "never_treated": 0, "treatment_years": [2030, None, 2011]},
    })
    assert main.run(["pipeline", "--config", config, "--out", str(tmp_path / "out")]) == 1
    captured = capsys.readouterr()
    assert "配置校验失败" in captured.err
    assert "2030" in captured.err
    assert "阶段" not in captured.out


def test_tolerance_flag_reaches_panel_solver(tmp_path, monkeypatch):
    import simulator.panel

    seen = []
    real = simulator.panel.solve_equilibrium

    def recording(params, G, Q, tol=None, **kwargs):
        seen.append(tol)
        return real(params, G, Q, tol=tol, **kwargs)

    monkeypatch.setattr(simulator.panel, "solve_equilibrium", recording)
    config = write_config(tmp_path / "panel.json", {"scenario": SMALL_SCENARIO, "jobs": 1})
    assert main.run(["gen-panel", "--config", config, "--out", str(tmp_path / "out"), "--tolerance", "1e-8"]) == 0
    assert seen == [1e-8, 1e-8]
