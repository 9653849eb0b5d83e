"""比较静态扫描与命题方向"""
import math

import numpy as np
import pytest

from model.statics import comparative_statics_sweep, is_monotone


def test_single_point_is_vacuously_monotone(base_params, lognormal_G, leisure_Q):
    result = comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "d", [0.2])
    assert result.complete
    assert all(result.verdicts.values())


def test_d_directions(base_params, lognormal_G, leisure_Q):
    result = comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "d", [0.0, 0.1, 0.2])
    assert result.verdicts == {
        "mean_wage_g": True,
        "unemployment_g": True,
        "participation_g": True,
        "segregation_share": True,
    }
    u = result.metric_values("unemployment_g")
    assert u[-1] > u[0]


def test_lambda_directions(base_params, lognormal_G, leisure_Q):
    result = comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "lambda_g", [0.5, 1.0, 1.5])
    assert all(result.verdicts.values())
    participation = result.metric_values("participation_g")
    assert participation[-1] > participation[0]


def test_segregation_monotone_on_fine_grid(base_params, lognormal_G, leisure_Q):
    grid = np.linspace(0.0, 1.0, 21)
    result = comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "d", grid)
    assert result.verdicts["segregation_share"]
    assert result.metric_values("segregation_share")[0] == pytest.approx(1.0 - base_params.p)


def test_parallel_matches_serial(base_params, lognormal_G, leisure_Q):
    grid = [0.0, 0.25, 0.5]
    serial = comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "d", grid, jobs=1)
    parallel = comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "d", grid, jobs=2)
    np.testing.assert_array_equal(serial.metric_values("mean_wage_g"), parallel.metric_values("mean_wage_g"))


def test_grid_must_increase(base_params, lognormal_G, leisure_Q):
    with pytest.raises(ValueError):
        comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "d", [0.2, 0.1])
    with pytest.raises(ValueError):
        comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "rho", [0.1])


def test_failed_point_is_flagged(base_params, lognormal_G, leisure_Q):
    result = comparative_statics_sweep(base_params, lognormal_G, leisure_Q, "d", [-1.0, 0.0, 0.1])
    assert result.failed_points == [-1.0]
    assert not result.complete
    frame = result.to_frame()
    assert bool(frame.loc[0, "failed"])
    assert math.isnan(frame.loc[0, "unemployment_g"])


@pytest.mark.parametrize("values,direction,expected", [
    ([1.0, 2.0, 3.0], "nondecreasing", True),
    ([1.0, 2.0, 3.0], "nonincreasing", False),
    ([3.0, 3.0 + 1e-12, 2.0], "nonincreasing", True),
    ([1.0, math.nan, 0.5], "nondecreasing", False),
    ([math.nan], "nondecreasing", True),
])
def test_is_monotone(values, direction, expected):
    assert is_monotone(values, direction, tie=1e-9) is expected
