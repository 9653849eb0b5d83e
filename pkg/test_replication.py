"""重复实验与安慰剂检验"""
import pandas as pd
import pytest

from config.run_config import load_run_config
from conftest import PRESETS
from econometrics.design import RegressionSpec
from econometrics.replication import (
    placebo_suite,
    rejection_report,
    replication_seed,
    run_replications,
    summarize_replications,
)
from simulator.calibration import calibrate_shock
from simulator.panel import PanelScenario, staggered_treatment_years


def small_scenario(params, G, Q, post=None, **overrides) -> PanelScenario:
    options = dict(
        n_states=6,
        first_year=2010,
        n_years=4,
        treatment_years=staggered_treatment_years(6, 2010, 4, never_treated=2),
        pre_params=params,
        post_params=params if post is None else post,
        G=G,
        Q=Q,
        couples_per_cell=30,
        seed=42,
    )
    options.update(overrides)
    return PanelScenario(**options)


def test_replication_seeds_are_distinct():
    seeds = {replication_seed(7, r) for r in range(50)}
    assert len(seeds) == 50
    assert replication_seed(7, 3) == replication_seed(7, 3)


def test_results_do_not_depend_on_jobs(base_params, lognormal_G, leisure_Q):
    scenario = small_scenario(base_params, lognormal_G, leisure_Q)
    spec = RegressionSpec(outcome="both_working")
    serial = run_replications(scenario, spec, 3, jobs=1)
    parallel = run_replications(scenario, spec, 3, jobs=2)
    pd.testing.assert_frame_equal(serial, parallel)
    assert serial["replication"].tolist() == [0, 0, 1, 1, 2, 2]
    assert serial["name"].tolist() == ["const", "ssm"] * 3


def test_summary_with_truth():
    frame = pd.DataFrame({
        "replication": [0, 1, 2, 3],
        "name": ["ssm"] * 4,
        "estimate": [0.1, 0.3, 0.2, 0.2],
        "se": [0.1] * 4,
        "t": [1.0, 3.0, 2.0, 2.0],
    })
    summary = summarize_replications(frame, truth={"ssm": 0.25}).set_index("name")
    assert summary.loc["ssm", "mean"] == pytest.approx(0.2)
    assert summary.loc["ssm", "bias"] == pytest.approx(-0.05)
    assert summary.loc["ssm", "mc_se"] == pytest.approx(summary.loc["ssm", "sd"] / 2.0)


def test_rejection_report_counts_strict_exceedances():
    frame = pd.DataFrame({
        "replication": range(4),
        "name": ["ssm"] * 4,
        "estimate": [0.0] * 4,
        "se": [1.0] * 4,
        "t": [0.5, -2.5, 1.95, 3.0],
    })
    report = rejection_report(frame, "ssm", 0.05)
    assert report.rejections == 2
    assert report.rejection_rate == 0.5
    assert report.ci_low < 0.5 < report.ci_high
    with pytest.raises(ValueError):
        rejection_report(frame, "lead_1", 0.05)


def test_level_one_rejects_everything(base_params, lognormal_G, leisure_Q):
    scenario = small_scenario(base_params, lognormal_G, leisure_Q)
    report, replications = placebo_suite(
        scenario, RegressionSpec(outcome="both_working"), n_reps=10, level=1.0, jobs=1, min_reps=10,
    )
    assert report.rejection_rate == 1.0
    assert replications["name"].unique().tolist() == ["ssm"]


def test_placebo_argument_checks(base_params, lognormal_G, leisure_Q):
    scenario = small_scenario(base_params, lognormal_G, leisure_Q)
    spec = RegressionSpec(outcome="both_working")
    with pytest.raises(ValueError):
        placebo_suite(scenario, spec, n_reps=50)
    with pytest.raises(ValueError):
        placebo_suite(scenario, spec, n_reps=100, level=0.0)
    with pytest.raises(ValueError):
        run_replications(scenario, spec, 5, estimator="synthetic_control")


@pytest.mark.slow
def test_placebo_rejection_rate_near_nominal():
    config = load_run_config(f"{PRESETS}/placebo.json")
    params = config.model.params.build()
    G, Q = config.model.distributions(params)
    scenario = config.scenario.build(params, params, G, Q, config.seed)
    report, _ = placebo_suite(scenario, config.regression.build(), n_reps=500, level=0.05, jobs=config.jobs)
    assert 0.03 <= report.rejection_rate <= 0.09


@pytest.mark.slow
def test_pipeline_effect_is_recovered():
    config = load_run_config(f"{PRESETS}/pipeline.json")
    params = config.model.params.build()
    G, Q = config.model.distributions(params)
    calibration = calibrate_shock(params, G, Q, config.shock.target_effect)
    scenario = config.scenario.build(params, calibration.post_params, G, Q, config.seed)
    replications = run_replications(scenario, config.regression.build(), 100, jobs=config.jobs, coefficients=["ssm"])
    summary = summarize_replications(replications, truth={"ssm": calibration.achieved_effect}).set_index("name")
    assert abs(summary.loc["ssm", "bias"]) <= 0.005
    assert 0.5 <= summary.loc["ssm", "se_ratio"] <= 2.0


@pytest.mark.slow
def test_event_study_leads_are_null_on_average():
    config = load_run_config(f"{PRESETS}/pipeline.json")
    params = config.model.params.build()
    G, Q = config.model.distributions(params)
    calibration = calibrate_shock(params, G, Q, config.shock.target_effect)
    scenario = config.scenario.build(params, calibration.post_params, G, Q, config.seed)
    spec = config.regression.build(leads=3, lags=config.pipeline.lags)
    leads = ["lead_3", "lead_2", "lead_1"]
    replications = run_replications(scenario, spec, 100, "event_study", jobs=config.jobs, coefficients=leads)
    summary = summarize_replications(replications, truth={name: 0.0 for name in leads}).set_index("name")
    for name in leads:
        assert abs(summary.loc[name, "mean"]) <= 2.0 * summary.loc[name, "mc_se"]
