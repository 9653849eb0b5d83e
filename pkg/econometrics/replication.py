"""
重复实验：同一场景在不同种子下反复生成面板并估计

每次重复的种子由 SeedSequence(seed, spawn_key=(2, r)) 派生，结果与并行度无关。
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats

from config import settings
from econometrics.design import RegressionSpec
from econometrics.estimators import estimate_ddd, estimate_did, estimate_event_study
from simulator.panel import PanelScenario, generate_panel

logger = logging.getLogger(__name__)

ESTIMATORS = {
    "did": estimate_did,
    "event_study": estimate_event_study,
    "ddd": estimate_ddd,
}


def replication_seed(seed: int, replication: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(2, replication)).generate_state(1)[0])


def _one_replication(
    scenario: PanelScenario,
    spec: RegressionSpec,
    estimator: str,
    replication: int,
    seed: int,
    coefficients: Optional[Sequence[str]],
) -> list[dict]:
    panel = generate_panel(replace(scenario, seed=replication_seed(seed, replication)))
    result = ESTIMATORS[estimator](panel, spec)
    names = result.key_names if coefficients is None else list(coefficients)
    rows = []
    for name in names:
        estimate, se, t = result.coefficient(name)
        rows.append({"replication": replication, "name": name, "estimate": estimate, "se": se, "t": t})
    return rows


def run_replications(
    scenario: PanelScenario,
    spec: RegressionSpec,
    n_reps: int,
    estimator: str = "did",
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    coefficients: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    """反复生成面板并估计。

    Args:
        scenario: 面板场景（scenario.seed 被每次重复的派生种子替换）
        spec: 回归设定
        n_reps: 重复次数
        estimator: "did"、"event_study" 或 "ddd"
        seed: 主种子，默认 scenario.seed
        jobs: 并行进程数，默认 settings.DEFAULT_JOBS
        coefficients: 记录的系数名，默认全部报告系数

    Returns:
        长表：replication, name, estimate, se, t（按 replication、系数顺序排列）
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"不支持的估计量 {estimator}，可选: {', '.join(ESTIMATORS)}")
    if n_reps < 1:
        raise ValueError(f"n_reps 必须 ≥ 1，收到 {n_reps}")
    seed = scenario.seed if seed is None else seed
    jobs = settings.DEFAULT_JOBS if jobs is None else jobs

    logger.info("开始 %d 次重复 (%s, jobs=%d)", n_reps, estimator, jobs)
    batches = Parallel(n_jobs=jobs)(
        delayed(_one_replication)(scenario, spec, estimator, r, seed, coefficients)
        for r in range(n_reps)
    )
    frame = pd.DataFrame([row for batch in batches for row in batch])
    logger.info("重复实验完成: %d 行", len(frame))
    return frame


def summarize_replications(frame: pd.DataFrame, truth: Optional[dict] = None) -> pd.DataFrame:
    """按系数汇总：均值、Monte Carlo 标准误、经验标准差与平均聚类标准误。"""
    grouped = frame.groupby("name", sort=False)
    summary = grouped.agg(
        n=("estimate", "size"),
        mean=("estimate", "mean"),
        sd=("estimate", "std"),
        mean_se=("se", "mean"),
    ).reset_index()
    summary["mc_se"] = summary["sd"] / np.sqrt(summary["n"])
    summary["se_ratio"] = summary["mean_se"] / summary["sd"]
    if truth is not None:
        summary["truth"] = summary["name"].map(truth)
        summary["bias"] = summary["mean"] - summary["truth"]
    return summary


# ============================================================
# 安慰剂检验
# ============================================================


@dataclass(frozen=True)
class PlaceboReport:
    """零效应场景下的拒绝率。"""

    coefficient: str
    level: float
    critical_value: float
    n_reps: int
    rejections: int
    ci_low: float
    ci_high: float
    mean_estimate: float
    sd_estimate: float
    mean_se: float

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.n_reps

    def to_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "level": self.level,
            "critical_value": self.critical_value,
            "n_reps": self.n_reps,
            "rejections": self.rejections,
            "rejection_rate": self.rejection_rate,
            "rejection_rate_ci": [self.ci_low, self.ci_high],
            "mean_estimate": self.mean_estimate,
            "sd_estimate": self.sd_estimate,
            "mean_se": self.mean_se,
        }


def rejection_report(replications: pd.DataFrame, coefficient: str, level: float) -> PlaceboReport:
    """由重复结果计算拒绝率与 Clopper-Pearson 区间。"""
    rows = replications.loc[replications["name"] == coefficient]
    if rows.empty:
        raise ValueError(f"重复结果中没有系数 {coefficient}")
    critical = float(stats.norm.ppf(1.0 - level / 2.0))
    rejections = int((rows["t"].abs() > critical).sum())
    n = len(rows)
    ci = stats.binomtest(rejections, n).proportion_ci(confidence_level=0.95, method="exact")
    return PlaceboReport(
        coefficient=coefficient,
        level=level,
        critical_value=critical,
        n_reps=n,
        rejections=rejections,
        ci_low=float(ci.low),
        ci_high=float(ci.high),
        mean_estimate=float(rows["estimate"].mean()),
        sd_estimate=float(rows["estimate"].std()),
        mean_se=float(rows["se"].mean()),
    )


def placebo_suite(
    scenario: PanelScenario,
    spec: RegressionSpec,
    n_reps: int,
    level: float = 0.05,
    estimator: str = "did",
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    min_reps: int = 100,
) -> tuple[PlaceboReport, pd.DataFrame]:
    """零效应场景的安慰剂检验。

    Args:
        scenario: 真实效应为零的面板场景
        spec: 回归设定
        n_reps: 重复次数（≥ min_reps）
        level: 名义显著性水平，(0, 1]
        estimator: 估计量名称
        min_reps: 重复次数下限

    Returns:
        (PlaceboReport, 每次重复的结果表)
    """
    if n_reps < min_reps:
        raise ValueError(f"安慰剂检验至少需要 {min_reps} 次重复，收到 {n_reps}")
    if not 0.0 < level <= 1.0:
        raise ValueError(f"level 必须在 (0, 1] 内，收到 {level}")
    if scenario.pre_params != scenario.post_params:
        logger.warning("安慰剂场景的处理前后参数不同，真实效应不为零")

    coefficient = spec.ddd_column if estimator == "ddd" else spec.treatment
    replications = run_replications(scenario, spec, n_reps, estimator, seed, jobs, coefficients=[coefficient])
    report = rejection_report(replications, coefficient, level)
    logger.info(
        "安慰剂拒绝率 %.3f (95%% CI %.3f–%.3f), %d 次重复",
        report.rejection_rate, report.ci_low, report.ci_high, report.n_reps,
    )
    return report, replications
