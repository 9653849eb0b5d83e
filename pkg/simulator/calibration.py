"""
冲击校准

在一个参数（d 或 λ_G）上做一维求根，使模型隐含的家庭结果
（默认：两个伴侣都就业的概率 e_G²）变化目标量 Δ。
"""
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional

from scipy import optimize

from config import settings
from model.distributions import DistributionSpec
from model.equilibrium import solve_equilibrium
from model.params import ModelParams
from model.wages import OUTCOME_MAPS
from utils.errors import CalibrationError

logger = logging.getLogger(__name__)

Knob = Literal["d", "lambda_g"]


@dataclass(frozen=True)
class CalibrationResult:
    """校准结果：冲击后的参数与实际达到的效应。"""

    base_params: ModelParams
    post_params: ModelParams
    knob: Knob
    outcome: str
    target_effect: float
    achieved_effect: float
    base_outcome: float
    post_outcome: float
    iterations: int

    def to_dict(self) -> dict:
        return {
            "knob": self.knob,
            "outcome": self.outcome,
            "target_effect": self.target_effect,
            "achieved_effect": self.achieved_effect,
            "base_outcome": self.base_outcome,
            "post_outcome": self.post_outcome,
            "base_value": getattr(self.base_params, self.knob),
            "post_value": getattr(self.post_params, self.knob),
            "iterations": self.iterations,
            "base_params": self.base_params.to_dict(),
            "post_params": self.post_params.to_dict(),
        }


def _knob_bounds(base: ModelParams, knob: Knob, target: float, bound: Optional[float]) -> tuple[float, float]:
    """搜索区间：d 下降 / λ_G 上升 对应正向效应。"""
    current = getattr(base, knob)
    if knob == "d":
        return (0.0, current) if target >= 0 else (current, bound if bound is not None else max(10.0 * current, 1.0))
    if target >= 0:
        return current, bound if bound is not None else max(10.0 * current, 1.0)
    return 0.0, current


def calibrate_shock(
    base: ModelParams,
    G: DistributionSpec,
    Q: DistributionSpec,
    target_effect: float,
    knob: Knob = "d",
    outcome: str = "both_working",
    bound: Optional[float] = None,
    tol: Optional[float] = None,
    solver_tol: Optional[float] = None,
) -> CalibrationResult:
    """在 knob 上二分，使结果变化 target_effect。

    Args:
        base: 冲击前参数
        G: 生产率分布
        Q: 非参与价值分布
        target_effect: 目标变化量 Δ（正值对应 d 下降或 λ_G 上升）
        knob: "d" 或 "lambda_g"
        outcome: "both_working"（e_G²）或 "employment"（e_G）
        bound: 反方向搜索时的参数上界
        tol: 效应的绝对容差，默认 settings.SOLVER_TOLERANCE 的 100 倍
        solver_tol: 每次求解均衡的相对容差，默认 settings.SOLVER_TOLERANCE

    Raises:
        CalibrationError: 目标在边界内不可达（附带可达范围）

    Returns:
        CalibrationResult
    """
    if knob not in ("d", "lambda_g"):
        raise ValueError(f"不支持的校准参数 {knob}")
    if outcome not in OUTCOME_MAPS:
        raise ValueError(f"不支持的结果变量 {outcome}，可选: {', '.join(OUTCOME_MAPS)}")
    if not math.isfinite(target_effect):
        raise ValueError(f"目标效应必须是有限值，收到 {target_effect}")
    tol = 100.0 * settings.SOLVER_TOLERANCE if tol is None else tol
    measure = OUTCOME_MAPS[outcome]

    def outcome_at(value: float) -> float:
        return measure(solve_equilibrium(base.with_value(knob, value), G, Q, tol=solver_tol), "G")

    base_value = getattr(base, knob)
    base_outcome = outcome_at(base_value)

    def result(value: float, iterations: int) -> CalibrationResult:
        post = base.with_value(knob, value)
        post_outcome = outcome_at(value)
        return CalibrationResult(
            base_params=base,
            post_params=post,
            knob=knob,
            outcome=outcome,
            target_effect=target_effect,
            achieved_effect=post_outcome - base_outcome,
            base_outcome=base_outcome,
            post_outcome=post_outcome,
            iterations=iterations,
        )

    if target_effect == 0.0:
        return result(base_value, 0)

    lower, upper = _knob_bounds(base, knob, target_effect, bound)
    far = lower if (knob == "d") == (target_effect >= 0) else upper
    attainable_effect = outcome_at(far) - base_outcome
    attainable = (min(0.0, attainable_effect), max(0.0, attainable_effect))

    if abs(attainable_effect - target_effect) <= tol:
        logger.info("目标效应恰好在边界 %s=%.6g 处达到", knob, far)
        return result(far, 0)
    if not attainable[0] <= target_effect <= attainable[1]:
        raise CalibrationError(
            f"目标效应 {target_effect:.6g} 不可达：调整 {knob} ∈ [{lower:.6g}, {upper:.6g}] "
            f"只能达到 [{attainable[0]:.6g}, {attainable[1]:.6g}]",
            attainable=attainable,
        )

    def gap(value: float) -> float:
        return outcome_at(value) - base_outcome - target_effect

    root, info = optimize.bisect(
        gap, lower, upper, xtol=1e-12, maxiter=settings.SOLVER_MAX_ITERATIONS, full_output=True, disp=False
    )
    calibrated = result(root, info.iterations)
    logger.info(
        "校准 %s: %.6g → %.6g，效应 %.6g (目标 %.6g)",
        knob, base_value, root, calibrated.achieved_effect, target_effect,
    )
    return calibrated
