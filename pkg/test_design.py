"""设计矩阵构造"""
import numpy as np
import pandas as pd
import pytest

from conftest import staggered_toy_panel, two_by_two
from econometrics.design import RegressionSpec, adoption_years, build_design, estimation_sample
from utils.errors import DataValidationError


def test_two_by_two_columns():
    design = build_design(two_by_two(rows_per_cell=2), RegressionSpec(outcome="y"))
    assert design.names == ["const", "ssm", "state[2]", "year[2011]"]
    assert design.n_absorbed["state_fe"] == 1
    assert design.n_absorbed["year_fe"] == 1
    assert design.nobs == 8


def test_trend_columns_per_state():
    panel = staggered_toy_panel({1: 2003, 2: 2004, 3: None})
    linear = build_design(panel, RegressionSpec(outcome="y", trend_order=1))
    quadratic = build_design(panel, RegressionSpec(outcome="y", trend_order=2))
    assert linear.column_map["trends"] == ["trend1[2]", "trend1[3]"]
    assert quadratic.column_map["trends"] == ["trend1[2]", "trend2[2]", "trend1[3]", "trend2[3]"]
    column = quadratic.X[:, quadratic.names.index("trend2[3]")]
    expected = np.where(panel["state_id"] == 3, (panel["year"] - 2000) ** 2, 0.0)
    np.testing.assert_array_equal(column, expected)


def test_event_window_indicators():
    panel = staggered_toy_panel({1: 2003, 2: 2005, 3: None})
    design = build_design(panel, RegressionSpec(outcome="y", leads=3, lags=2))
    window = ["lead_3", "lead_2", "lead_1", "lag_1", "lag_2"]
    assert design.column_map["leads"] + design.column_map["lags"] == window

    event_time = panel["year"] - panel["state_id"].map({1: 2003, 2: 2005})
    for name, condition in (
        ("ssm", event_time == 0),
        ("lead_3", event_time == -3),
        ("lead_1", event_time == -1),
        ("lag_1", event_time == 1),
        ("lag_2", event_time >= 2),
    ):
        column = design.X[:, design.names.index(name)]
        np.testing.assert_array_equal(column, condition.fillna(False).to_numpy(dtype=float))
    assert not design.X[panel["state_id"].to_numpy() == 3][:, [design.names.index(n) for n in window]].any()


def test_event_window_without_lags_uses_cumulative_treatment():
    panel = staggered_toy_panel({1: 2003, 2: 2005, 3: None})
    design = build_design(panel, RegressionSpec(outcome="y", leads=2))
    np.testing.assert_array_equal(design.X[:, design.names.index("ssm")], panel["ssm"].to_numpy(dtype=float))


def test_window_wider_than_panel():
    panel = staggered_toy_panel({1: 2001, 2: None}, years=range(2000, 2003))
    with pytest.raises(DataValidationError):
        build_design(panel, RegressionSpec(outcome="y", leads=3))


def test_empty_requested_term():
    # 所有州都在第二年采纳，lead_2 没有观测
    panel = staggered_toy_panel({1: 2001, 2: 2001, 3: None}, years=range(2000, 2005))
    with pytest.raises(DataValidationError):
        build_design(panel, RegressionSpec(outcome="y", leads=2))


def test_treatment_must_be_absorbing():
    panel = staggered_toy_panel({1: 2002, 2: None})
    panel.loc[(panel["state_id"] == 1) & (panel["year"] == 2005), "ssm"] = 0
    with pytest.raises(DataValidationError):
        adoption_years(panel, RegressionSpec(outcome="y", leads=1))


def test_ddd_columns():
    rows = []
    for group in ("same_sex", "opposite_sex"):
        frame = two_by_two(rows_per_cell=2)
        rows.append(frame.assign(group=group))
    panel = pd.concat(rows, ignore_index=True)
    design = build_design(panel, RegressionSpec(outcome="y", group="group", group_value="same_sex"))
    assert design.names[:3] == ["const", "ssm_x_group", "ssm"]
    assert design.column_map["group_x_state"] == ["group_x_state[2]"]
    assert design.column_map["group_x_year"] == ["group_x_year[2011]"]
    in_group = (panel["group"] == "same_sex").to_numpy(dtype=float)
    np.testing.assert_array_equal(design.X[:, 1], panel["ssm"].to_numpy() * in_group)


def test_sample_filter_and_year_range():
    panel = staggered_toy_panel({1: 2003, 2: 2004, 3: None}).assign(kind="a")
    panel.loc[panel["state_id"] == 3, "kind"] = "b"
    sample = estimation_sample(panel, RegressionSpec(outcome="y", sample={"kind": ["a"]}))
    assert set(sample["state_id"]) == {1, 2}
    design = build_design(panel, RegressionSpec(outcome="y", year_range=(2002, 2005)))
    assert design.frame["year"].between(2002, 2005).all()
    with pytest.raises(DataValidationError):
        estimation_sample(panel, RegressionSpec(outcome="y", sample={"kind": ["c"]}))


@pytest.mark.parametrize("mutate,spec", [
    (lambda f: f.drop(columns=["y"]), RegressionSpec(outcome="y")),
    (lambda f: f.assign(y=f["y"].where(f.index > 0)), RegressionSpec(outcome="y")),
    (lambda f: f.assign(state_id=1), RegressionSpec(outcome="y", state_effects=False)),
    (lambda f: f.assign(w=-1.0), RegressionSpec(outcome="y", weights="w")),
    (lambda f: f, RegressionSpec(outcome="y", reference_state=99)),
])
def test_invalid_data(mutate, spec):
    with pytest.raises(DataValidationError):
        build_design(mutate(two_by_two(rows_per_cell=2)), spec)


@pytest.mark.parametrize("kwargs", [{"trend_order": 3}, {"leads": -1}, {"adjustment": "CR3"}])
def test_invalid_spec(kwargs):
    with pytest.raises(ValueError):
        RegressionSpec(outcome="y", **kwargs)
