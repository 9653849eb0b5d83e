"""
运行配置（JSON）的 pydantic 模式

所有模型都禁止未知字段；校验失败时把每个出错字段的路径拼进 ConfigError。
"""
import json
import logging
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import settings
from econometrics.design import RegressionSpec
from model.distributions import DistributionSpec
from model.equilibrium import default_leisure
from model.params import ModelParams
from simulator.panel import PanelScenario, staggered_treatment_years
from utils.errors import ConfigError

logger = logging.getLogger(__name__)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ============================================================
# 模型
# ============================================================


class DistributionConfig(StrictModel):
    kind: Literal["exponential", "uniform", "lognormal", "truncated_normal"]
    rate: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    log_mean: Optional[float] = None
    log_sd: Optional[float] = None
    mean: Optional[float] = None
    sd: Optional[float] = None

    @model_validator(mode="after")
    def _check_parameters(self) -> "DistributionConfig":
        self.build()
        return self

    def build(self, role: str = "productivity") -> DistributionSpec:
        return DistributionSpec(
            kind=self.kind, rate=self.rate, lower=self.lower, upper=self.upper,
            log_mean=self.log_mean, log_sd=self.log_sd, mean=self.mean, sd=self.sd, role=role,
        )


class ParamsConfig(StrictModel):
    lambda_g: float = Field(1.0, ge=0)
    lambda_s: float = Field(1.0, ge=0)
    eta: float = Field(0.1, gt=0)
    rho: float = Field(0.05, gt=0)
    b: float = 0.4
    alpha: float = Field(0.5, ge=0, le=1)
    d: float = Field(0.2, ge=0)
    p: float = Field(0.3, ge=0, le=1)

    def build(self) -> ModelParams:
        return ModelParams(**self.model_dump())


class ModelConfig(StrictModel):
    params: ParamsConfig = Field(default_factory=ParamsConfig)
    productivity: DistributionConfig = Field(
        default_factory=lambda: DistributionConfig(kind="lognormal", log_mean=0.0, log_sd=0.5)
    )
    leisure: Optional[DistributionConfig] = None
    leisure_scale: float = Field(settings.LEISURE_SCALE, gt=0)

    def distributions(self, params: Optional[ModelParams] = None,
                      tol: Optional[float] = None) -> tuple[DistributionSpec, DistributionSpec]:
        """返回 (G, Q)；未显式给出 leisure 时 Q = uniform[0, leisure_scale·v_S]。"""
        G = self.productivity.build("productivity")
        if self.leisure is not None:
            return G, self.leisure.build("leisure")
        return G, default_leisure(params or self.params.build(), G, self.leisure_scale, tol=tol)


# ============================================================
# 命令相关的段
# ============================================================


class SweepConfig(StrictModel):
    parameter: Literal["d", "lambda_g"] = "d"
    grid: list[float] = Field(default_factory=lambda: np.linspace(0.0, 1.0, 21).tolist(), min_length=1)


class VerifyConfig(StrictModel):
    d_grid: list[float] = Field(default_factory=lambda: np.linspace(0.0, 1.0, 21).tolist(), min_length=1)
    lambda_g_grid: list[float] = Field(default_factory=lambda: np.linspace(0.2, 2.0, 21).tolist(), min_length=1)
    plot: bool = False


class SimulationConfig(StrictModel):
    n_agents: int = Field(10000, ge=1)
    horizon: float = Field(200.0, gt=0)
    burn_in: float = Field(50.0, ge=0)
    shift_time: Optional[float] = Field(None, gt=0)
    post_params: Optional[ParamsConfig] = None

    @model_validator(mode="after")
    def _check_window(self) -> "SimulationConfig":
        if self.burn_in >= self.horizon:
            raise ValueError(f"burn_in ({self.burn_in}) 必须小于 horizon ({self.horizon})")
        if (self.shift_time is None) != (self.post_params is None):
            raise ValueError("shift_time 与 post_params 必须同时给出")
        return self


class ShockConfig(StrictModel):
    knob: Literal["d", "lambda_g"] = "d"
    outcome: Literal["both_working", "employment"] = "both_working"
    target_effect: Optional[float] = None
    post_value: Optional[float] = Field(None, ge=0)
    bound: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_of(self) -> "ShockConfig":
        if self.target_effect is not None and self.post_value is not None:
            raise ValueError("target_effect 与 post_value 只能给出一个")
        return self


class ScenarioConfig(StrictModel):
    n_states: int = Field(51, ge=1)
    first_year: int = 2008
    n_years: int = Field(9, ge=1)
    treatment_years: Optional[list[Optional[int]]] = None
    never_treated: int = Field(0, ge=0)
    couples_per_cell: int = Field(1000, ge=1)
    opposite_couples_per_cell: int = Field(0, ge=0)
    noise: Literal["bernoulli", "none"] = "bernoulli"
    linear_trend_sd: float = Field(0.0, ge=0)
    quadratic_trend_sd: float = Field(0.0, ge=0)
    year_shock_sd: float = Field(0.0, ge=0)
    cell_shock_sd: float = Field(0.0, ge=0)
    hours_per_worker: float = Field(40.0, gt=0)
    hours_sd: float = Field(0.0, ge=0)
    marriage_uptake: float = Field(0.0, ge=0, le=1)
    opposite_married_share: float = Field(0.7, ge=0, le=1)
    covariates: list[Literal["age_head", "college"]] = Field(default_factory=list)
    clamp_budget: float = Field(settings.CLAMP_BUDGET, ge=0, le=1)

    @model_validator(mode="after")
    def _check_schedule(self) -> "ScenarioConfig":
        if self.treatment_years is not None and len(self.treatment_years) != self.n_states:
            raise ValueError(f"treatment_years 长度 {len(self.treatment_years)} 与 n_states {self.n_states} 不一致")
        last_year = self.first_year + self.n_years - 1
        for year in self.treatment_years or ():
            if year is not None and not (self.first_year <= year <= last_year):
                raise ValueError(f"处理年份 {year} 不在 [{self.first_year}, {last_year}] 内")
        if self.never_treated > self.n_states:
            raise ValueError(f"never_treated ({self.never_treated}) 超过 n_states ({self.n_states})")
        return self

    def schedule(self) -> tuple[Optional[int], ...]:
        if self.treatment_years is not None:
            return tuple(self.treatment_years)
        return staggered_treatment_years(self.n_states, self.first_year, self.n_years, self.never_treated)

    def build(self, pre: ModelParams, post: ModelParams, G: DistributionSpec, Q: DistributionSpec,
              seed: int, solver_tol: Optional[float] = None) -> PanelScenario:
        data = self.model_dump(exclude={"treatment_years", "never_treated", "covariates"})
        return PanelScenario(
            treatment_years=self.schedule(),
            pre_params=pre,
            post_params=post,
            G=G,
            Q=Q,
            covariates=tuple(self.covariates),
            seed=seed,
            solver_tol=solver_tol,
            **data,
        )


class RegressionConfig(StrictModel):
    outcome: str = "both_working"
    treatment: str = "ssm"
    state: str = "state_id"
    time: str = "year"
    state_effects: bool = True
    year_effects: bool = True
    trend_order: Literal[0, 1, 2] = 0
    leads: int = Field(0, ge=0)
    lags: int = Field(0, ge=0)
    group: Optional[str] = None
    group_value: str = "same_sex"
    covariates: list[str] = Field(default_factory=list)
    extra_treatments: list[str] = Field(default_factory=list)
    cluster: str = "state_id"
    weights: Optional[str] = None
    sample: dict[str, list] = Field(default_factory=dict)
    year_range: Optional[tuple[int, int]] = None
    reference_state: Optional[int] = None
    reference_year: Optional[int] = None
    adjustment: Literal["CR0", "CR1"] = settings.DEFAULT_CLUSTER_ADJUSTMENT

    def build(self, **overrides) -> RegressionSpec:
        data = self.model_dump()
        data["covariates"] = tuple(data["covariates"])
        data["extra_treatments"] = tuple(data["extra_treatments"])
        data["year_range"] = tuple(data["year_range"]) if data["year_range"] else None
        data.update(overrides)
        return RegressionSpec(**data)


class ReplicationConfig(StrictModel):
    estimator: Literal["did", "event_study", "ddd"] = "did"
    n_reps: int = Field(100, ge=1)
    level: float = Field(0.05, gt=0, le=1)


class PipelineConfig(StrictModel):
    leads: int = Field(3, ge=0)
    lags: int = Field(2, ge=0)
    recovery_reps: int = Field(1, ge=1)
    placebo_reps: int = Field(0, ge=0)
    level: float = Field(0.05, gt=0, le=1)
    recovery_tolerance: float = Field(0.005, gt=0)
    plot: bool = False

    @model_validator(mode="after")
    def _placebo_size(self) -> "PipelineConfig":
        if 0 < self.placebo_reps < 100:
            raise ValueError(f"placebo_reps 为 0（跳过）或至少 100，收到 {self.placebo_reps}")
        return self


# ============================================================
# 顶层
# ============================================================


class RunConfig(StrictModel):
    model: ModelConfig = Field(default_factory=ModelConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    shock: ShockConfig = Field(default_factory=ShockConfig)
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    regression: RegressionConfig = Field(default_factory=RegressionConfig)
    replication: ReplicationConfig = Field(default_factory=ReplicationConfig)
    pipeline: PipelineConfig = Field(default_factory=PipelineConfig)
    panel_path: Optional[str] = None
    output_dir: Optional[str] = None
    seed: int = Field(settings.DEFAULT_SEED, ge=0)
    jobs: int = Field(settings.DEFAULT_JOBS, ge=1)
    tolerance: float = Field(settings.SOLVER_TOLERANCE, gt=0)


def format_validation_error(exc: ValidationError) -> str:
    """把 pydantic 错误整理成 `字段路径: 消息` 的多行文本。"""
    lines = []
    for error in exc.errors():
        path = ".".join(str(part) for part in error["loc"]) or "<root>"
        lines.append(f"{path}: {error['msg']}")
    return "\n".join(lines)


def load_run_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """读取并校验运行配置。

    Args:
        path: JSON 配置文件路径，None 表示全部使用默认值
        overrides: 命令行覆盖的顶层字段（seed、jobs、tolerance、output_dir）

    Raises:
        ConfigError: 文件不可读、不是合法 JSON，或字段校验失败

    Returns:
        RunConfig
    """
    data: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError as exc:
            raise ConfigError(f"配置文件不存在: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"配置文件不是合法 JSON: {path} (第 {exc.lineno} 行: {exc.msg})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"配置文件顶层必须是对象: {path}")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"配置校验失败:\n{format_validation_error(exc)}") from exc
    logger.info("已加载配置 %s", path or "<默认值>")
    return config
