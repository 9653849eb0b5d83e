"""
pytest 共享夹具：基准参数、生产率分布、玩具面板
"""
import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import settings
from model.distributions import DistributionSpec
from model.params import ModelParams

PRESETS = settings.PRESETS_DIR


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 重复实验规模的验收测试（pytest -m slow 运行）")


def pytest_collection_modifyitems(config, items):
    if config.getoption("markexpr"):
        return
    skip_slow = pytest.mark.skip(reason="慢测试，使用 pytest -m slow 运行")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def base_params() -> ModelParams:
    return ModelParams(lambda_g=1.0, lambda_s=1.0, eta=0.1, rho=0.05, b=0.4, alpha=0.5, d=0.2, p=0.3)


@pytest.fixture
def exponential_G() -> DistributionSpec:
    return DistributionSpec.exponential(1.0)


@pytest.fixture
def lognormal_G() -> DistributionSpec:
    return DistributionSpec.lognormal(0.0, 0.5)


@pytest.fixture
def leisure_Q() -> DistributionSpec:
    return DistributionSpec.uniform(0.0, 3.0, role="leisure")


def two_by_two(control=(1.0, 2.0), treated=(1.0, 3.0), rows_per_cell: int = 1) -> pd.DataFrame:
    """2 州 × 2 年的无噪声面板：州 2 在第二年被处理。"""
    rows = []
    for state, values in ((1, control), (2, treated)):
        for t, year in enumerate((2010, 2011)):
            for _ in range(rows_per_cell):
                rows.append({"state_id": state, "year": year, "ssm": int(state == 2 and t == 1), "y": values[t]})
    return pd.DataFrame(rows)


def staggered_toy_panel(adoption: dict, years=range(2000, 2008), effect: float = 0.0,
                        state_effect: float = 0.3, year_effect: float = 0.1) -> pd.DataFrame:
    """每个 州×年份 一行的交错处理玩具面板，结果由固定效应加水平移动精确构成。"""
    rows = []
    for state, first in adoption.items():
        for year in years:
            treated = first is not None and year >= first
            rows.append({
                "state_id": state,
                "year": year,
                "ssm": int(treated),
                "y": state_effect * state + year_effect * (year - min(years)) ** 1.5 + effect * treated,
            })
    return pd.DataFrame(rows)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
