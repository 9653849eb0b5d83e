"""
模型参数与均衡结果的数据类型
"""
import math
from dataclasses import asdict, dataclass, replace
from typing import Literal, Optional

Worker = Literal["G", "S"]      # G: 少数群体劳动者, S: 非少数群体劳动者
Firm = Literal["N", "P"]        # N: 无偏见雇主, P: 有偏见雇主

WORKERS: tuple[Worker, ...] = ("G", "S")
FIRMS: tuple[Firm, ...] = ("N", "P")


@dataclass(frozen=True)
class ModelParams:
    """外生参数 {λ_G, λ_S, η, ρ, b, α, d, p}。"""

    lambda_g: float     # 少数群体的工作到达率
    lambda_s: float     # 非少数群体的工作到达率
    eta: float          # 工作破坏率
    rho: float          # 贴现率
    b: float            # 失业的流量价值
    alpha: float        # 劳动者议价权重
    d: float            # 有偏见雇主雇用少数群体的负效用
    p: float            # 有偏见雇主的比例

    def __post_init__(self) -> None:
        for name in ("lambda_g", "lambda_s", "eta", "rho", "b", "alpha", "d", "p"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"参数 {name} 必须是有限值，收到 {value}")
        if not self.eta > 0:
            raise ValueError(f"eta 必须 > 0，收到 {self.eta}")
        if not self.rho > 0:
            raise ValueError(f"rho 必须 > 0，收到 {self.rho}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha 必须在 [0, 1] 内，收到 {self.alpha}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p 必须在 [0, 1] 内，收到 {self.p}")
        if self.d < 0:
            raise ValueError(f"d 必须 ≥ 0，收到 {self.d}")
        if self.lambda_g < 0 or self.lambda_s < 0:
            raise ValueError(f"到达率必须 ≥ 0，收到 λ_G={self.lambda_g}, λ_S={self.lambda_s}")

    def arrival_rate(self, worker: Worker) -> float:
        return self.lambda_g if worker == "G" else self.lambda_s

    def disutility(self, worker: Worker, firm: Firm) -> float:
        """d·𝟙{worker=G ∧ firm=P}"""
        return self.d if (worker == "G" and firm == "P") else 0.0

    def with_value(self, name: str, value: float) -> "ModelParams":
        return replace(self, **{name: value})

    def scaled(self, factor: float) -> "ModelParams":
        """所有货币量（b, d）乘以 factor。"""
        return replace(self, b=self.b * factor, d=self.d * factor)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WorkerOutcome:
    """单一劳动者类型的稳态结果。"""

    reservation_value: float        # v_J = ρU_J
    unemployment_rate: float        # u_J
    participation_rate: float       # l_J
    employment_share: float         # e_J = l_J·(1 − u_J)
    acceptance_probability: float   # p·(1−G(v+dI)) + (1−p)·(1−G(v))
    all_rejection: bool = False     # 任何会面都不会形成匹配
    iterations: int = 0
    residual: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Equilibrium:
    """稳态均衡：两类劳动者的结果 + 职业隔离指标 P_GN。"""

    params: ModelParams
    g: WorkerOutcome
    s: WorkerOutcome
    segregation_share: Optional[float]  # 少数群体全部被拒绝时为 None

    def worker(self, worker: Worker) -> WorkerOutcome:
        return self.g if worker == "G" else self.s

    def reservation_value(self, worker: Worker) -> float:
        return self.worker(worker).reservation_value

    @property
    def max_residual(self) -> float:
        return max(self.g.residual, self.s.residual)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "G": self.g.to_dict(),
            "S": self.s.to_dict(),
            "segregation_share": self.segregation_share,
        }
