"""
比较静态扫描

在参数网格（d 或 λ_G）上逐点求解均衡，记录 w̄_G, u_G, l_G, P_GN，
并判断它们是否按命题预测的方向单调变化。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from config import settings
from model.distributions import DistributionSpec
from model.equilibrium import solve_equilibrium
from model.params import Equilibrium, ModelParams
from model.wages import mean_accepted_wage
from utils.errors import ModelError

logger = logging.getLogger(__name__)

SweepParameter = Literal["d", "lambda_g"]
Direction = Literal["nondecreasing", "nonincreasing"]

# 命题预测的方向（沿参数增加的方向）
PREDICTED_DIRECTIONS: dict[str, dict[str, Direction]] = {
    # d 上升：工资下降、失业上升、参与下降、隔离上升
    "d": {
        "mean_wage_g": "nonincreasing",
        "unemployment_g": "nondecreasing",
        "participation_g": "nonincreasing",
        "segregation_share": "nondecreasing",
    },
    # λ_G 上升：工资上升、失业下降、参与上升
    "lambda_g": {
        "mean_wage_g": "nondecreasing",
        "unemployment_g": "nonincreasing",
        "participation_g": "nondecreasing",
    },
}

METRICS = ("mean_wage_g", "unemployment_g", "participation_g", "segregation_share")


@dataclass(frozen=True)
class SweepPoint:
    """网格上的一个点。"""

    value: float
    equilibrium: Optional[Equilibrium]
    mean_wage_g: float = math.nan
    failed: bool = False
    error: str = ""

    def metric(self, name: str) -> float:
        if self.equilibrium is None:
            return math.nan
        if name == "mean_wage_g":
            return self.mean_wage_g
        if name == "unemployment_g":
            return self.equilibrium.g.unemployment_rate
        if name == "participation_g":
            return self.equilibrium.g.participation_rate
        share = self.equilibrium.segregation_share
        return math.nan if share is None else share


@dataclass(frozen=True)
class SweepResult:
    """扫描结果：网格、逐点均衡以及单调性判定。"""

    parameter: SweepParameter
    grid: tuple[float, ...]
    points: tuple[SweepPoint, ...]
    verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def failed_points(self) -> list[float]:
        return [point.value for point in self.points if point.failed]

    @property
    def complete(self) -> bool:
        return not self.failed_points

    def metric_values(self, name: str) -> np.ndarray:
        return np.array([point.metric(name) for point in self.points])

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for point in self.points:
            eq = point.equilibrium
            rows.append({
                self.parameter: point.value,
                "failed": point.failed,
                "reservation_value_g": eq.g.reservation_value if eq else math.nan,
                "reservation_value_s": eq.s.reservation_value if eq else math.nan,
                "mean_wage_g": point.metric("mean_wage_g"),
                "unemployment_g": point.metric("unemployment_g"),
                "participation_g": point.metric("participation_g"),
                "employment_share_g": eq.g.employment_share if eq else math.nan,
                "segregation_share": point.metric("segregation_share"),
            })
        return pd.DataFrame(rows)

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "grid": list(self.grid),
            "verdicts": dict(self.verdicts),
            "failed_points": self.failed_points,
            "points": [
                {
                    "value": point.value,
                    "failed": point.failed,
                    "error": point.error,
                    "mean_wage_g": None if math.isnan(point.mean_wage_g) else point.mean_wage_g,
                    "equilibrium": point.equilibrium.to_dict() if point.equilibrium else None,
                }
                for point in self.points
            ],
        }


# ============================================================
# 单调性判定
# ============================================================


def is_monotone(values: Sequence[float], direction: Direction, tie: float) -> bool:
    """判断序列是否单调（忽略 NaN）；幅度小于 tie 的反向变化视为持平。"""
    finite = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if finite.size < 2:
        return True
    steps = np.diff(finite)
    if direction == "nonincreasing":
        steps = -steps
    scale = np.maximum(1.0, np.abs(finite[:-1]))
    return bool(np.all(steps >= -tie * scale))


# ============================================================
# 扫描
# ============================================================


def _solve_point(
    params: ModelParams,
    G: DistributionSpec,
    Q: DistributionSpec,
    parameter: SweepParameter,
    value: float,
    tol: Optional[float],
) -> SweepPoint:
    try:
        point_params = params.with_value(parameter, value)
        eq = solve_equilibrium(point_params, G, Q, tol=tol)
    except (ModelError, ValueError) as e:
        logger.warning("%s=%.6g 求解失败: %s", parameter, value, e)
        return SweepPoint(value=value, equilibrium=None, failed=True, error=f"{type(e).__name__}: {e}")
    try:
        mean_wage = mean_accepted_wage("G", eq, point_params, G)
    except ModelError:
        mean_wage = math.nan
    return SweepPoint(value=value, equilibrium=eq, mean_wage_g=mean_wage)


def comparative_statics_sweep(
    params: ModelParams,
    G: DistributionSpec,
    Q: DistributionSpec,
    parameter: SweepParameter,
    grid: Sequence[float],
    tol: Optional[float] = None,
    jobs: int = 1,
) -> SweepResult:
    """在网格上求解均衡并给出单调性判定。

    Args:
        params: 基准参数（被扫描的参数取网格值）
        G: 生产率分布
        Q: 非参与价值分布
        parameter: "d" 或 "lambda_g"
        grid: 严格递增的网格
        tol: 求解容差
        jobs: 并行进程数

    Raises:
        ValueError: 参数名未知或网格不严格递增

    Returns:
        SweepResult；失败的点带 failed 标记，判定只基于成功的点
    """
    if parameter not in PREDICTED_DIRECTIONS:
        raise ValueError(f"不支持扫描参数 {parameter}，可选: {', '.join(PREDICTED_DIRECTIONS)}")
    values = [float(v) for v in grid]
    if not values:
        raise ValueError("扫描网格为空")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"扫描网格必须严格递增: {values}")

    if jobs == 1:
        points = [_solve_point(params, G, Q, parameter, v, tol) for v in values]
    else:
        points = Parallel(n_jobs=jobs)(
            delayed(_solve_point)(params, G, Q, parameter, v, tol) for v in values
        )

    tolerance = settings.SOLVER_TOLERANCE if tol is None else tol
    tie = settings.MONOTONE_TIE_FACTOR * tolerance
    result = SweepResult(parameter=parameter, grid=tuple(values), points=tuple(points))
    verdicts = {
        metric: is_monotone(result.metric_values(metric), direction, tie)
        for metric, direction in PREDICTED_DIRECTIONS[parameter].items()
    }
    logger.info("扫描 %s (%d 点): %s", parameter, len(values), verdicts)
    return SweepResult(parameter=parameter, grid=tuple(values), points=tuple(points), verdicts=verdicts)
