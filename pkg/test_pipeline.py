"""端到端流水线"""
import json

import pytest

import main
from config.run_config import load_run_config
from workflow.orchestrator import analytic_effect, run_pipeline


def pipeline_config(tmp_path, **sections) -> str:
    data = {
        "shock": {"target_effect": 0.002},
        "scenario": {
            "n_states": 5,
            "first_year": 2010,
            "n_years": 4,
            "never_treated": 1,
            "couples_per_cell": 10,
            "noise": "none",
        },
        "pipeline": {"leads": 1, "lags": 1, "recovery_reps": 1, "placebo_reps": 0},
        "seed": 9,
        "jobs": 1,
    }
    data.update(sections)
    path = tmp_path / "pipeline.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_noiseless_pipeline_recovers_calibrated_effect(tmp_path):
    config = load_run_config(pipeline_config(tmp_path))
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    summary = run_pipeline(config, str(out_dir))

    assert summary["calibration"]["achieved_effect"] == pytest.approx(0.002, abs=1e-6)
    beta = summary["beta_vs_delta"]
    assert beta["delta"] == pytest.approx(summary["calibration"]["achieved_effect"], abs=1e-12)
    assert beta["difference"] == pytest.approx(0.0, abs=1e-10)
    names = [row["name"] for row in summary["event_study"]["coefficients"]]
    assert names == ["const", "ssm", "lead_1", "lag_1"]
    for name in (
        "panel.csv", "panel_metadata.json", "did_coefficients.csv",
        "event_study_coefficients.csv", "summary.json", "manifest.json",
    ):
        assert (out_dir / name).exists()
    assert "recovery" not in summary


def test_event_study_plot(tmp_path):
    config = load_run_config(pipeline_config(
        tmp_path, pipeline={"leads": 2, "lags": 1, "recovery_reps": 1, "placebo_reps": 0, "plot": True},
    ))
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    run_pipeline(config, str(out_dir))
    assert (out_dir / "event_study.png").stat().st_size > 0


def test_stage_label_on_failure(tmp_path, capsys):
    config = pipeline_config(tmp_path, shock={"target_effect": 0.9})
    assert main.run(["pipeline", "--config", config, "--out", str(tmp_path / "out")]) == 2
    assert "阶段 1/4" in capsys.readouterr().err


def test_analytic_effect_by_outcome():
    metadata = {"analytic": {"both_working_effect": 0.02, "employment_effect": 0.01}}
    assert analytic_effect(metadata, "both_working", 40.0) == 0.02
    assert analytic_effect(metadata, "hours_total", 40.0) == pytest.approx(0.8)
    assert analytic_effect(metadata, "married", 40.0) is None
