"""合成面板生成器"""
import numpy as np
import pandas as pd
import pytest

from econometrics.design import RegressionSpec
from econometrics.estimators import estimate_did
from model.equilibrium import solve_equilibrium
from simulator.panel import (
    BASE_COLUMNS,
    OPPOSITE_SEX,
    SAME_SEX,
    PanelDataset,
    PanelScenario,
    generate_panel,
    staggered_treatment_years,
)
from utils.errors import DataValidationError


def scenario(base_params, G, Q, **overrides) -> PanelScenario:
    options = dict(
        n_states=4,
        first_year=2010,
        n_years=4,
        treatment_years=(2011, 2012, None, None),
        pre_params=base_params,
        post_params=base_params.with_value("d", 0.0),
        G=G,
        Q=Q,
        couples_per_cell=20,
        seed=5,
    )
    options.update(overrides)
    return PanelScenario(**options)


def test_schedule_is_deterministic():
    years = staggered_treatment_years(n_states=5, first_year=2000, n_years=4, never_treated=2)
    assert years == (2001, 2002, 2003, None, None)
    assert staggered_treatment_years(3, 2000, 1) == (2000, 2000, 2000)
    with pytest.raises(ValueError):
        staggered_treatment_years(3, 2000, 4, never_treated=4)


def test_panel_shape_and_columns(base_params, lognormal_G, leisure_Q):
    panel = generate_panel(scenario(base_params, lognormal_G, leisure_Q, opposite_couples_per_cell=10))
    frame = panel.frame
    assert list(frame.columns) == list(BASE_COLUMNS)
    assert len(frame) == 4 * 4 * (20 + 10)
    assert frame["household_id"].is_unique
    assert set(frame["group"]) == {SAME_SEX, OPPOSITE_SEX}
    assert frame["both_working"].isin([0.0, 1.0]).all()
    assert panel.metadata["treatment_years"] == {1: 2011, 2: 2012, 3: None, 4: None}


def test_no_shock_means_zero_effect(base_params, lognormal_G, leisure_Q):
    panel = generate_panel(scenario(base_params, lognormal_G, leisure_Q, post_params=base_params))
    assert panel.metadata["analytic"]["both_working_effect"] == 0.0


def test_noiseless_two_by_two_recovers_analytic_effect(base_params, lognormal_G, leisure_Q):
    post = base_params.with_value("d", 0.0)
    panel = generate_panel(scenario(
        base_params, lognormal_G, leisure_Q,
        n_states=2, n_years=2, treatment_years=(2011, None), post_params=post,
        couples_per_cell=3, noise="none",
    ))
    e_pre = solve_equilibrium(base_params, lognormal_G, leisure_Q).g.employment_share
    e_post = solve_equilibrium(post, lognormal_G, leisure_Q).g.employment_share
    treated = panel.frame.query("state_id == 1 and year == 2011")
    np.testing.assert_allclose(treated["both_working"], e_post ** 2)
    np.testing.assert_allclose(treated["hours_total"], 2.0 * e_post * 40.0)

    result = estimate_did(panel, RegressionSpec(outcome="both_working"))
    estimate, _, _ = result.coefficient("ssm")
    assert estimate == pytest.approx(e_post ** 2 - e_pre ** 2, abs=1e-12)


def test_same_seed_same_panel(base_params, lognormal_G, leisure_Q):
    a = generate_panel(scenario(base_params, lognormal_G, leisure_Q, year_shock_sd=0.01))
    b = generate_panel(scenario(base_params, lognormal_G, leisure_Q, year_shock_sd=0.01))
    pd.testing.assert_frame_equal(a.frame, b.frame)
    c = generate_panel(scenario(base_params, lognormal_G, leisure_Q, year_shock_sd=0.01, seed=6))
    assert not a.frame["both_working"].equals(c.frame["both_working"])


def test_covariates_and_marriage(base_params, lognormal_G, leisure_Q):
    panel = generate_panel(scenario(
        base_params, lognormal_G, leisure_Q, covariates=("age_head", "college"), marriage_uptake=1.0,
    ))
    frame = panel.frame
    assert frame["age_head"].between(30, 60).all()
    assert frame["college"].isin([0, 1]).all()
    assert (frame.loc[frame["ssm"] == 1, "married"] == 1).all()
    assert (frame.loc[frame["ssm"] == 0, "married"] == 0).all()


def test_clamp_budget_exceeded(base_params, lognormal_G, leisure_Q):
    with pytest.raises(DataValidationError):
        generate_panel(scenario(base_params, lognormal_G, leisure_Q, cell_shock_sd=5.0, clamp_budget=0.0))


@pytest.mark.parametrize("overrides", [
    {"treatment_years": (2011,)},
    {"treatment_years": (2020, None, None, None)},
    {"couples_per_cell": 0},
    {"noise": "gaussian"},
    {"covariates": ("income",)},
    {"seed": -1},
])
def test_invalid_scenarios(base_params, lognormal_G, leisure_Q, overrides):
    with pytest.raises(ValueError):
        scenario(base_params, lognormal_G, leisure_Q, **overrides)


def test_validate_rejects_broken_panels(base_params, lognormal_G, leisure_Q):
    panel = generate_panel(scenario(base_params, lognormal_G, leisure_Q))
    frame = panel.frame

    with pytest.raises(DataValidationError):
        PanelDataset(frame=frame.drop(columns=["married"])).validate()
    with pytest.raises(DataValidationError):
        PanelDataset(frame=frame.assign(ssm=frame["ssm"].astype(float).where(frame.index > 0))).validate()
    with pytest.raises(DataValidationError):
        PanelDataset(frame=frame.loc[~((frame["state_id"] == 1) & (frame["year"] == 2010))]).validate()
    with pytest.raises(DataValidationError):
        PanelDataset(frame=frame).validate({1: 2013, 2: 2012, 3: None, 4: None})


def test_csv_round_trip(tmp_path, base_params, lognormal_G, leisure_Q):
    panel = generate_panel(scenario(base_params, lognormal_G, leisure_Q, covariates=("college",)))
    path = tmp_path / "panel.csv"
    panel.to_csv(str(path))
    loaded = PanelDataset.from_csv(str(path), covariates=("college",))
    loaded.validate(panel.metadata["treatment_years"])
    pd.testing.assert_frame_equal(loaded.frame, panel.frame[panel.columns], check_dtype=False)
