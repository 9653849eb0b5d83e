"""
双重差分估计量

estimate_did / estimate_event_study / estimate_ddd 共用 fit()：
build_design → ols → cluster_vcov → RegressionResult。
"""
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import stats

from econometrics.design import Design, RegressionSpec, _as_frame, build_design
from econometrics.ols import cluster_vcov, ols
from utils.errors import DataValidationError

logger = logging.getLogger(__name__)

# 这些列组属于被吸收的虚拟变量，不出现在 JSON 系数表中
ABSORBED_GROUPS = ("state_fe", "year_fe", "group_x_state", "group_x_year", "trends")


@dataclass
class RegressionResult:
    """一次回归的系数、聚类稳健协方差与诊断信息。"""

    kind: str
    spec: RegressionSpec
    names: list[str]
    coef: np.ndarray
    vcov: np.ndarray
    nobs: int
    n_clusters: int
    n_absorbed: dict[str, int]
    dropped: list[str]
    diagnostics: dict
    column_map: dict[str, list[str]] = field(default_factory=dict)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def t(self) -> np.ndarray:
        se = self.se
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(se > 0, self.coef / se, np.nan)

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.t))

    @property
    def key_names(self) -> list[str]:
        """报告的系数：处理、lead/lag、其他政策与协变量。"""
        absorbed = {name for group in ABSORBED_GROUPS for name in self.column_map.get(group, [])}
        return [name for name in self.names if name not in absorbed]

    def coefficient(self, name: str) -> tuple[float, float, float]:
        """返回 (估计值, 标准误, t 值)。

        Raises:
            KeyError: 该列不存在或已因共线被剔除
        """
        if name not in self.names:
            if name in self.dropped:
                raise KeyError(f"{name} 因共线被剔除")
            raise KeyError(f"没有名为 {name} 的系数")
        i = self.names.index(name)
        return float(self.coef[i]), float(self.se[i]), float(self.t[i])

    def confidence_interval(self, name: str, level: float = 0.95) -> tuple[float, float]:
        estimate, se, _ = self.coefficient(name)
        crit = stats.norm.ppf(0.5 + level / 2.0)
        return estimate - crit * se, estimate + crit * se

    @property
    def treatment_name(self) -> str:
        return self.column_map["treatment"][0]

    def to_frame(self, key_only: bool = False) -> pd.DataFrame:
        names = self.key_names if key_only else self.names
        index = [self.names.index(n) for n in names]
        return pd.DataFrame({
            "name": names,
            "estimate": self.coef[index],
            "se": self.se[index],
            "t": self.t[index],
            "p_value": self.p_values[index],
        })

    def to_dict(self) -> dict:
        table = self.to_frame(key_only=True)
        return {
            "kind": self.kind,
            "spec": self.spec.to_dict(),
            "coefficients": table.to_dict(orient="records"),
            "nobs": self.nobs,
            "n_clusters": self.n_clusters,
            "n_absorbed": self.n_absorbed,
            "dropped_collinear": self.dropped,
            "diagnostics": self.diagnostics,
        }


# ============================================================
# 拟合
# ============================================================


def fit_design(design: Design, spec: RegressionSpec, kind: str) -> RegressionResult:
    """对已构造的设计矩阵做 OLS 与聚类协方差。

    共线检测时固定效应列排在前面，与固定效应共线的是报告的系数而不是虚拟变量。
    """
    absorbed = {
        name for group in ABSORBED_GROUPS + ("intercept", "group") for name in design.column_map.get(group, [])
    }
    order = np.array(
        [j for j, name in enumerate(design.names) if name in absorbed]
        + [j for j, name in enumerate(design.names) if name not in absorbed],
        dtype=int,
    )
    fitted = ols(design.X[:, order], design.y, design.weights)
    kept = order[fitted.kept]
    position = np.argsort(kept)
    kept, coef = kept[position], fitted.coef[position]
    dropped = [design.names[j] for j in sorted(order[fitted.dropped].tolist())]
    if dropped:
        logger.warning("共线剔除的列: %s", ", ".join(dropped))
    treatment = design.column_map["treatment"][0]
    if treatment in dropped:
        raise DataValidationError(f"处理列 {treatment} 与固定效应完全共线，系数无法识别")

    X = design.X[:, kept]
    vcov = cluster_vcov(X, fitted.residuals, design.clusters, spec.adjustment, design.weights)
    names = [design.names[j] for j in kept]
    column_map = {
        group: [n for n in members if n in set(names)]
        for group, members in design.column_map.items()
    }
    return RegressionResult(
        kind=kind,
        spec=spec,
        names=names,
        coef=coef,
        vcov=vcov,
        nobs=design.nobs,
        n_clusters=int(pd.Series(design.clusters).nunique()),
        n_absorbed=design.n_absorbed,
        dropped=dropped,
        diagnostics={
            "rss": fitted.rss,
            "r_squared": fitted.r_squared,
            "residual_orthogonality": fitted.orthogonality,
            "rank": int(fitted.kept.size),
        },
        column_map=column_map,
    )


def fit(panel, spec: RegressionSpec, kind: str = "did") -> RegressionResult:
    design = build_design(panel, spec)
    result = fit_design(design, spec, kind)
    estimate, se, t = result.coefficient(result.treatment_name)
    logger.info(
        "%s: %s = %.6g (se %.3g, t %.2f), N=%d, 聚类 %d",
        kind, result.treatment_name, estimate, se, t, result.nobs, result.n_clusters,
    )
    return result


def estimate_did(panel, spec: RegressionSpec) -> RegressionResult:
    """双向固定效应 DiD。

    Raises:
        ValueError: spec 含事件研究窗口或组别交互
        DataValidationError: 数据与设定不符
    """
    if spec.event_study:
        raise ValueError("estimate_did 不接受 lead/lag 窗口，请使用 estimate_event_study")
    if spec.group is not None:
        raise ValueError("estimate_did 不接受组别交互，请使用 estimate_ddd")
    return fit(panel, spec, "did")


def estimate_event_study(panel, spec: RegressionSpec) -> RegressionResult:
    """带 lead / lag 的事件研究。"""
    if not spec.event_study:
        raise ValueError("estimate_event_study 需要 leads > 0 或 lags > 0")
    if spec.group is not None:
        raise ValueError("事件研究不支持组别交互")
    return fit(panel, spec, "event_study")


def estimate_ddd(panel, spec: RegressionSpec) -> RegressionResult:
    """三重差分：处理×组别 的系数。

    Raises:
        ValueError: spec 未指定 group
        DataValidationError: 处理组或对照组中缺少某一组别
    """
    if spec.group is None:
        raise ValueError("estimate_ddd 需要指定 group 列")
    if spec.event_study:
        raise ValueError("三重差分不支持 lead/lag 窗口")
    frame = _as_frame(panel)
    if spec.group not in frame.columns or spec.treatment not in frame.columns:
        raise DataValidationError(f"面板缺少 {spec.group} 或 {spec.treatment} 列")
    groups = frame[spec.group].unique()
    if spec.group_value not in groups or len(groups) < 2:
        raise DataValidationError(f"三重差分需要 {spec.group} 至少有两个取值且包含 {spec.group_value}")
    for flag, label in ((1, "处理"), (0, "对照")):
        present = frame.loc[frame[spec.treatment] == flag, spec.group].nunique()
        if present < len(groups):
            raise DataValidationError(f"{label}观测中没有出现全部组别")
    return fit(panel, spec, "ddd")


# ============================================================
# 变体
# ============================================================


def collapse_to_cells(panel, outcome: str, by: Sequence[str] = ("state_id", "year"),
                      carry: Sequence[str] = ("ssm",), weight_column: str = "cell_count") -> pd.DataFrame:
    """把微观面板折叠为单元格均值，单元格人数作为权重。

    Raises:
        DataValidationError: carry 列在单元格内不恒定
    """
    frame = _as_frame(panel)
    by = list(by)
    grouped = frame.groupby(by, sort=True)
    for column in carry:
        if (grouped[column].nunique() > 1).any():
            raise DataValidationError(f"{column} 在 {by} 单元格内不恒定，无法折叠")
    cells = grouped.agg(**{outcome: (outcome, "mean"), weight_column: (outcome, "size")})
    for column in carry:
        cells[column] = grouped[column].first()
    return cells.reset_index()


def leave_one_out(panel, spec: RegressionSpec, estimator=estimate_did) -> pd.DataFrame:
    """依次剔除一个州重新估计。"""
    frame = _as_frame(panel)
    rows = []
    for state in sorted(frame[spec.state].unique().tolist()):
        subset = frame.loc[frame[spec.state] != state]
        result = estimator(subset, spec)
        estimate, se, t = result.coefficient(result.treatment_name)
        rows.append({"excluded_state": state, "estimate": estimate, "se": se, "t": t})
    return pd.DataFrame(rows)
