"""
回归设定与设计矩阵

y_ist = β·SSM_st + δ_s + α_t + τ_s·t + τ²_s·t² + x'γ + ε_ist
  - 州虚拟变量、年份虚拟变量各去掉一个参照类
  - 每个非参照州可加线性 / 二次趋势
  - 事件研究：处理列改为事件时间 0 的指示，另加 lead / lag 指示
  - 三重差分：处理×组别 为关注系数，吸收 组别×州 与 组别×年份
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Union

import numpy as np
import pandas as pd

from utils.errors import DataValidationError

logger = logging.getLogger(__name__)

Adjustment = Literal["CR0", "CR1"]


@dataclass(frozen=True)
class RegressionSpec:
    """回归设定。"""

    outcome: str
    treatment: str = "ssm"
    state: str = "state_id"
    time: str = "year"
    state_effects: bool = True
    year_effects: bool = True
    trend_order: int = 0
    leads: int = 0
    lags: int = 0
    group: Optional[str] = None             # 三重差分的组别列
    group_value: Any = "same_sex"           # 受影响组别的取值
    covariates: tuple[str, ...] = ()
    extra_treatments: tuple[str, ...] = ()  # 其他同期政策指示
    cluster: str = "state_id"
    weights: Optional[str] = None
    sample: dict = field(default_factory=dict)          # {列: 允许取值列表}
    year_range: Optional[tuple[int, int]] = None
    reference_state: Any = None
    reference_year: Any = None
    adjustment: Adjustment = "CR1"

    def __post_init__(self) -> None:
        if self.trend_order not in (0, 1, 2):
            raise ValueError(f"trend_order 只能是 0、1、2，收到 {self.trend_order}")
        if self.leads < 0 or self.lags < 0:
            raise ValueError(f"lead/lag 窗口必须非负，收到 ({self.leads}, {self.lags})")
        if self.adjustment not in ("CR0", "CR1"):
            raise ValueError(f"adjustment 只能是 CR0 或 CR1，收到 {self.adjustment}")

    @property
    def event_study(self) -> bool:
        return self.leads > 0 or self.lags > 0

    @property
    def ddd_column(self) -> str:
        return f"{self.treatment}_x_{self.group}"

    def referenced_columns(self) -> list[str]:
        columns = [self.outcome, self.treatment, self.state, self.time, self.cluster]
        columns += list(self.covariates) + list(self.extra_treatments) + list(self.sample)
        if self.group:
            columns.append(self.group)
        if self.weights:
            columns.append(self.weights)
        return list(dict.fromkeys(columns))

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "treatment": self.treatment,
            "state": self.state,
            "time": self.time,
            "state_effects": self.state_effects,
            "year_effects": self.year_effects,
            "trend_order": self.trend_order,
            "leads": self.leads,
            "lags": self.lags,
            "group": self.group,
            "group_value": self.group_value,
            "covariates": list(self.covariates),
            "extra_treatments": list(self.extra_treatments),
            "cluster": self.cluster,
            "weights": self.weights,
            "sample": {k: list(v) for k, v in self.sample.items()},
            "year_range": list(self.year_range) if self.year_range else None,
            "reference_state": self.reference_state,
            "reference_year": self.reference_year,
            "adjustment": self.adjustment,
        }


@dataclass
class Design:
    """设计矩阵、被解释变量及列映射。"""

    X: np.ndarray
    y: np.ndarray
    names: list[str]
    column_map: dict[str, list[str]]
    clusters: np.ndarray
    weights: Optional[np.ndarray]
    n_absorbed: dict[str, int]
    frame: pd.DataFrame

    @property
    def nobs(self) -> int:
        return int(self.X.shape[0])


# ============================================================
# 样本
# ============================================================


def _as_frame(panel: Union[pd.DataFrame, Any]) -> pd.DataFrame:
    return panel if isinstance(panel, pd.DataFrame) else panel.frame


def estimation_sample(panel, spec: RegressionSpec) -> pd.DataFrame:
    """按 sample 过滤条件与 year_range 取出估计样本，并校验列。"""
    frame = _as_frame(panel)
    missing = [c for c in spec.referenced_columns() if c not in frame.columns]
    if missing:
        raise DataValidationError(f"回归引用的列不存在: {', '.join(missing)}")
    mask = pd.Series(True, index=frame.index)
    for column, allowed in spec.sample.items():
        mask &= frame[column].isin(list(allowed))
    frame = frame.loc[mask]
    if frame.empty:
        raise DataValidationError("按 sample 条件过滤后样本为空")
    return frame


def adoption_years(frame: pd.DataFrame, spec: RegressionSpec) -> pd.Series:
    """每个州首次处理的年份（从未处理为 NaN）；要求处理是吸收态。"""
    treated = frame.loc[frame[spec.treatment] == 1]
    first = treated.groupby(spec.state)[spec.time].min()
    adoption = frame[spec.state].map(first)
    reverted = (frame[spec.time] >= adoption) & (frame[spec.treatment] != 1)
    if reverted.any():
        raise DataValidationError("事件研究要求处理状态一旦开始就不再撤销")
    return adoption


# ============================================================
# 设计矩阵
# ============================================================


def _dummies(values: pd.Series, reference: Any, prefix: str) -> tuple[list[str], list[np.ndarray]]:
    levels = sorted(values.unique().tolist())
    if reference is None:
        reference = levels[0]
    if reference not in levels:
        raise DataValidationError(f"参照类 {reference} 不在 {prefix} 的取值中")
    names, columns = [], []
    for level in levels:
        if level == reference:
            continue
        names.append(f"{prefix}[{level}]")
        columns.append((values == level).to_numpy(dtype=float))
    return names, columns


def build_design(panel, spec: RegressionSpec) -> Design:
    """构造设计矩阵。

    Args:
        panel: PanelDataset 或 DataFrame
        spec: 回归设定

    Raises:
        DataValidationError: 列缺失、聚类数不足、窗口越界、请求的项没有观测

    Returns:
        Design
    """
    frame = estimation_sample(panel, spec)
    adoption = adoption_years(frame, spec) if spec.event_study else None
    if spec.year_range is not None:
        first, last = spec.year_range
        keep = (frame[spec.time] >= first) & (frame[spec.time] <= last)
        frame = frame.loc[keep]
        adoption = adoption.loc[keep] if adoption is not None else None
        if frame.empty:
            raise DataValidationError(f"year_range {spec.year_range} 内没有观测")

    used = [c for c in spec.referenced_columns() if c not in spec.sample]
    if frame[used].isna().any().any():
        bad = frame[used].isna().any()
        raise DataValidationError(f"回归变量存在缺失值: {', '.join(bad[bad].index)}")

    n_clusters = frame[spec.cluster].nunique()
    if n_clusters < 2:
        raise DataValidationError(f"聚类数为 {n_clusters}，至少需要 2 个")
    years = sorted(frame[spec.time].unique().tolist())
    if spec.event_study and max(spec.leads, spec.lags) > len(years) - 1:
        raise DataValidationError(
            f"lead/lag 窗口 ({spec.leads}, {spec.lags}) 超出观测年份跨度 {len(years)}"
        )

    names: list[str] = []
    columns: list[np.ndarray] = []
    column_map: dict[str, list[str]] = {}

    def add(group: str, new_names: list[str], new_columns: list[np.ndarray]) -> None:
        names.extend(new_names)
        columns.extend(new_columns)
        column_map.setdefault(group, []).extend(new_names)

    n = len(frame)
    treatment = frame[spec.treatment].to_numpy(dtype=float)
    add("intercept", ["const"], [np.ones(n)])

    # ------------------------------------------------------------------
    # 处理相关的列
    # ------------------------------------------------------------------
    if spec.group is not None:
        in_group = (frame[spec.group] == spec.group_value).to_numpy(dtype=float)
        add("treatment", [spec.ddd_column], [treatment * in_group])
        add("treatment_main", [spec.treatment], [treatment])
    elif spec.event_study:
        event_time = (frame[spec.time] - adoption).to_numpy(dtype=float)
        with np.errstate(invalid="ignore"):
            if spec.lags > 0:
                current = (event_time == 0).astype(float)
            else:
                current = (event_time >= 0).astype(float)
            add("treatment", [spec.treatment], [current])
            lead_names = [f"lead_{j}" for j in range(spec.leads, 0, -1)]
            add("leads", lead_names, [(event_time == -j).astype(float) for j in range(spec.leads, 0, -1)])
            lag_columns = []
            for k in range(1, spec.lags + 1):
                lag_columns.append(((event_time >= k) if k == spec.lags else (event_time == k)).astype(float))
            add("lags", [f"lag_{k}" for k in range(1, spec.lags + 1)], lag_columns)
    else:
        add("treatment", [spec.treatment], [treatment])

    if spec.extra_treatments:
        add("extra_treatments", list(spec.extra_treatments),
            [frame[c].to_numpy(dtype=float) for c in spec.extra_treatments])
    if spec.covariates:
        add("covariates", list(spec.covariates), [frame[c].to_numpy(dtype=float) for c in spec.covariates])

    for group in ("treatment", "leads", "lags", "extra_treatments"):
        for name in column_map.get(group, []):
            if not np.any(columns[names.index(name)]):
                raise DataValidationError(f"请求的项 {name} 在估计样本中没有任何非零观测")

    # ------------------------------------------------------------------
    # 固定效应与趋势
    # ------------------------------------------------------------------
    states = frame[spec.state]
    if spec.group is not None:
        add("group", [spec.group], [in_group])
    if spec.state_effects:
        add("state_fe", *_dummies(states, spec.reference_state, "state"))
    if spec.year_effects:
        add("year_fe", *_dummies(frame[spec.time], spec.reference_year, "year"))
    if spec.group is not None:
        state_names, state_columns = _dummies(states, spec.reference_state, "group_x_state")
        add("group_x_state", state_names, [c * in_group for c in state_columns])
        year_names, year_columns = _dummies(frame[spec.time], spec.reference_year, "group_x_year")
        add("group_x_year", year_names, [c * in_group for c in year_columns])
    if spec.trend_order > 0:
        t = (frame[spec.time] - years[0]).to_numpy(dtype=float)
        state_names, state_columns = _dummies(states, spec.reference_state, "state")
        trend_names, trend_columns = [], []
        for name, dummy in zip(state_names, state_columns):
            level = name[len("state["):-1]
            for order in range(1, spec.trend_order + 1):
                trend_names.append(f"trend{order}[{level}]")
                trend_columns.append(dummy * t ** order)
        add("trends", trend_names, trend_columns)

    X = np.column_stack(columns)
    weights = frame[spec.weights].to_numpy(dtype=float) if spec.weights else None
    if weights is not None and np.any(weights < 0):
        raise DataValidationError(f"权重列 {spec.weights} 存在负值")

    absorbed = {
        group: len(column_map.get(group, []))
        for group in ("state_fe", "year_fe", "group_x_state", "group_x_year", "trends")
    }
    return Design(
        X=X,
        y=frame[spec.outcome].to_numpy(dtype=float),
        names=names,
        column_map=column_map,
        clusters=frame[spec.cluster].to_numpy(),
        weights=weights,
        n_absorbed=absorbed,
        frame=frame,
    )
