"""
匹配生产率分布 G(x) 与非参与价值分布 Q(z)

支持四种分布：exponential / uniform / lognormal / truncated_normal（在 0 处截断的正态）。
部分期望 PE(c) = ∫_c^∞ (x − c) dG(x)：前三种使用闭式解，其余走自适应积分。
"""
import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Literal, Optional

import numpy as np
from scipy import integrate, special, stats

from config import settings
from utils.errors import QuadratureError

logger = logging.getLogger(__name__)

DistributionKind = Literal["exponential", "uniform", "lognormal", "truncated_normal"]
DistributionRole = Literal["productivity", "leisure"]

# 具有闭式部分期望的分布
CLOSED_FORM_KINDS = ("exponential", "uniform", "lognormal")


@dataclass(frozen=True)
class DistributionSpec:
    """分布描述：种类 + 对应参数 + 在模型中的角色。

    参数约定：
      exponential       rate
      uniform           lower, upper
      lognormal         log_mean, log_sd
      truncated_normal  mean, sd（底层正态的参数，截断区间为 [0, ∞)）
    """

    kind: DistributionKind
    rate: Optional[float] = None
    lower: Optional[float] = None
    upper: Optional[float] = None
    log_mean: Optional[float] = None
    log_sd: Optional[float] = None
    mean: Optional[float] = None
    sd: Optional[float] = None
    role: DistributionRole = "productivity"

    def __post_init__(self) -> None:
        if self.kind == "exponential":
            if self.rate is None or not self.rate > 0:
                raise ValueError(f"exponential 分布需要 rate > 0，收到 {self.rate}")
        elif self.kind == "uniform":
            if self.lower is None or self.upper is None or not self.upper > self.lower:
                raise ValueError(f"uniform 分布需要 lower < upper，收到 [{self.lower}, {self.upper}]")
        elif self.kind == "lognormal":
            if self.log_mean is None or self.log_sd is None or not self.log_sd > 0:
                raise ValueError(f"lognormal 分布需要 log_sd > 0，收到 {self.log_sd}")
        elif self.kind == "truncated_normal":
            if self.mean is None or self.sd is None or not self.sd > 0:
                raise ValueError(f"truncated_normal 分布需要 sd > 0，收到 {self.sd}")
        else:
            raise ValueError(f"不支持的分布类型: {self.kind}")

    # ------------------------------------------------------------------
    # 构造函数
    # ------------------------------------------------------------------

    @classmethod
    def exponential(cls, rate: float, role: DistributionRole = "productivity") -> "DistributionSpec":
        return cls(kind="exponential", rate=rate, role=role)

    @classmethod
    def uniform(cls, lower: float, upper: float, role: DistributionRole = "productivity") -> "DistributionSpec":
        return cls(kind="uniform", lower=lower, upper=upper, role=role)

    @classmethod
    def lognormal(cls, log_mean: float, log_sd: float, role: DistributionRole = "productivity") -> "DistributionSpec":
        return cls(kind="lognormal", log_mean=log_mean, log_sd=log_sd, role=role)

    @classmethod
    def truncated_normal(cls, mean: float, sd: float, role: DistributionRole = "productivity") -> "DistributionSpec":
        return cls(kind="truncated_normal", mean=mean, sd=sd, role=role)

    # ------------------------------------------------------------------
    # scipy 冻结分布
    # ------------------------------------------------------------------

    @cached_property
    def frozen(self):
        """对应的 scipy.stats 冻结分布。"""
        if self.kind == "exponential":
            return stats.expon(scale=1.0 / self.rate)
        if self.kind == "uniform":
            return stats.uniform(loc=self.lower, scale=self.upper - self.lower)
        if self.kind == "lognormal":
            return stats.lognorm(s=self.log_sd, scale=math.exp(self.log_mean))
        return stats.truncnorm(a=-self.mean / self.sd, b=np.inf, loc=self.mean, scale=self.sd)

    def cdf(self, x: float) -> float:
        return float(self.frozen.cdf(x))

    def sf(self, x: float) -> float:
        """生存函数 1 − G(x)。"""
        return float(self.frozen.sf(x))

    def pdf(self, x: float) -> float:
        return float(self.frozen.pdf(x))

    @cached_property
    def expectation(self) -> float:
        return float(self.frozen.mean())

    @property
    def support_min(self) -> float:
        if self.kind == "uniform":
            return float(self.lower)
        return 0.0

    @property
    def support_max(self) -> float:
        if self.kind == "uniform":
            return float(self.upper)
        return math.inf

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """从分布中抽样。"""
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, size=size)
        if self.kind == "uniform":
            return rng.uniform(self.lower, self.upper, size=size)
        if self.kind == "lognormal":
            return rng.lognormal(self.log_mean, self.log_sd, size=size)
        return self.frozen.rvs(size=size, random_state=rng)

    # ------------------------------------------------------------------
    # 变换
    # ------------------------------------------------------------------

    def scaled(self, factor: float) -> "DistributionSpec":
        """把随机变量乘以 factor > 0 后的分布。"""
        if not factor > 0:
            raise ValueError(f"缩放因子必须为正，收到 {factor}")
        if self.kind == "exponential":
            return replace(self, rate=self.rate / factor)
        if self.kind == "uniform":
            return replace(self, lower=self.lower * factor, upper=self.upper * factor)
        if self.kind == "lognormal":
            return replace(self, log_mean=self.log_mean + math.log(factor))
        return replace(self, mean=self.mean * factor, sd=self.sd * factor)

    def to_dict(self) -> dict:
        fields = {"kind": self.kind, "role": self.role}
        for name in ("rate", "lower", "upper", "log_mean", "log_sd", "mean", "sd"):
            value = getattr(self, name)
            if value is not None:
                fields[name] = value
        return fields


# ============================================================
# 部分期望
# ============================================================


def partial_expectation(dist: DistributionSpec, c: float, tol: Optional[float] = None) -> float:
    """计算 PE(c) = ∫_c^∞ (x − c) dG(x)。

    Args:
        dist: 生产率分布（必须有有限均值）
        c: 阈值
        tol: 自适应积分的绝对容差，默认 settings.QUAD_TOLERANCE

    Raises:
        ValueError: c 非有限值，或分布均值无限
        QuadratureError: 积分未达到容差（附带误差估计）

    Returns:
        非负标量
    """
    if not math.isfinite(c):
        raise ValueError(f"部分期望的阈值必须是有限值，收到 {c}")
    mean = dist.expectation
    if not math.isfinite(mean):
        raise ValueError(f"{dist.kind} 分布的均值无限，无法计算部分期望")

    # 阈值低于支撑下界时所有质量都在阈值之上
    if c <= dist.support_min:
        return mean - c

    if dist.kind == "exponential":
        return math.exp(-dist.rate * c) / dist.rate

    if dist.kind == "uniform":
        if c >= dist.upper:
            return 0.0
        return (dist.upper - c) ** 2 / (2.0 * (dist.upper - dist.lower))

    if dist.kind == "lognormal":
        mu, sigma = dist.log_mean, dist.log_sd
        log_c = math.log(c)
        upper_mass = math.exp(mu + 0.5 * sigma ** 2) * special.ndtr((mu + sigma ** 2 - log_c) / sigma)
        survival = special.ndtr((mu - log_c) / sigma)
        return max(float(upper_mass - c * survival), 0.0)

    return _partial_expectation_quad(dist, c, settings.QUAD_TOLERANCE if tol is None else tol)


def _partial_expectation_quad(dist: DistributionSpec, c: float, tol: float) -> float:
    """分部积分后 PE(c) = ∫_c^∞ (1 − G(x)) dx，用 QUADPACK 计算。"""
    result = integrate.quad(
        dist.sf, c, np.inf, epsabs=tol, epsrel=0.0, limit=settings.QUAD_LIMIT, full_output=1
    )
    value, abserr = result[0], result[1]
    if abserr > tol:
        message = result[3] if len(result) > 3 else ""
        raise QuadratureError(
            f"部分期望积分未收敛 (c={c:.6g}, 误差估计 {abserr:.3e} > {tol:.1e}) {message}".strip(),
            error_estimate=abserr,
        )
    return max(float(value), 0.0)
