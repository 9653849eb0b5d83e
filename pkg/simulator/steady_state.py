"""
事件驱动的连续时间蒙特卡洛模拟

每个劳动者是一个 simpy 进程，状态在 就业 / 失业 / 不参与 之间切换：
  - 失业时以速率 λ_J 与雇主会面，雇主类型 ~ Bernoulli(p)，生产率 x ~ G，
    x 不低于接受阈值时形成匹配，工资由纳什议价决定
  - 被拒绝的会面按稀疏化合并：直接以速率 λ_J·a_J 抽取下一次成功匹配的时间，
    再从条件分布中抽雇主类型与 x（a_J 为单次会面的接受概率）
  - 就业时以速率 η 发生工作破坏
所有时钟都是精确的指数分布，无时间离散化误差。
阈值来自 model_core 的均衡，模拟器内部不重新求解均衡。
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Literal, Optional

import numpy as np
import simpy

from model.distributions import DistributionSpec
from model.params import FIRMS, WORKERS, Equilibrium, Firm, ModelParams, Worker
from model.wages import acceptance_threshold, participation_decision, wage

logger = logging.getLogger(__name__)

Status = Literal["employed", "unemployed", "non_participant"]

# 每次补充的生产率抽样个数
_DRAW_BLOCK = 64
# 条件抽样：生存概率低于此值时改用逆生存函数
_REJECTION_FLOOR = 0.05


# ============================================================
# 数据类型
# ============================================================


@dataclass
class AgentState:
    """单个劳动者的状态与累计时间（只统计预热期之后的时间）。"""

    worker: Worker
    z: float
    status: Status
    since: float = 0.0
    wage: Optional[float] = None
    firm: Optional[Firm] = None
    x: Optional[float] = None
    time_in: dict = field(default_factory=lambda: {"employed": 0.0, "unemployed": 0.0, "non_participant": 0.0})
    time_by_firm: dict = field(default_factory=lambda: {"N": 0.0, "P": 0.0})
    job_finds: int = 0
    separations: int = 0


@dataclass(frozen=True)
class Estimate:
    """蒙特卡洛估计值及其标准误。"""

    value: float
    se: float
    n: int

    def within(self, target: float, k: float = 3.0) -> bool:
        """|value − target| ≤ k·se（se 为 0 时要求完全相等）。"""
        return abs(self.value - target) <= k * self.se + 1e-12


@dataclass(frozen=True)
class WorkerSimStats:
    """单一劳动者类型的模拟统计量。"""

    unemployment_rate: Estimate
    participation_rate: Estimate
    job_finding_rate: Estimate
    separation_rate: Estimate
    mean_wage: Estimate
    mean_wage_by_firm: dict
    min_wage: float
    segregation_share: Optional[Estimate] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SimStats:
    """模拟结果：两类劳动者的统计量与元数据。"""

    g: WorkerSimStats
    s: WorkerSimStats
    total_agent_time: float
    metadata: dict

    def worker(self, worker: Worker) -> WorkerSimStats:
        return self.g if worker == "G" else self.s

    def to_dict(self) -> dict:
        return {
            "G": self.g.to_dict(),
            "S": self.s.to_dict(),
            "total_agent_time": self.total_agent_time,
            "metadata": self.metadata,
        }


# ============================================================
# 随机数
# ============================================================


def agent_rng(seed: int, worker_index: int, agent_index: int) -> np.random.Generator:
    """按计数器拆分出每个劳动者独立的随机数流。"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(worker_index, agent_index)))


class _AgentDraws:
    """单个劳动者的随机抽样；生产率按块预抽以减少调用开销。"""

    def __init__(self, rng: np.random.Generator, G: DistributionSpec) -> None:
        self._rng = rng
        self._G = G
        self._block = np.empty(0)
        self._cursor = 0

    def exponential(self, rate: float) -> float:
        return float(self._rng.exponential(1.0 / rate))

    def uniform(self) -> float:
        return float(self._rng.random())

    def productivity(self) -> float:
        if self._cursor >= self._block.size:
            self._block = self._G.sample(_DRAW_BLOCK, self._rng)
            self._cursor = 0
        x = float(self._block[self._cursor])
        self._cursor += 1
        return x

    def productivity_above(self, threshold: float, survival: float) -> float:
        """x ~ G 在 x ≥ threshold 上的条件分布。"""
        if survival >= _REJECTION_FLOOR:
            while True:
                x = self.productivity()
                if x >= threshold:
                    return x
        # 接受概率很小时用逆生存函数
        return max(threshold, float(self._G.frozen.isf(survival * self.uniform())))


@dataclass(frozen=True)
class _OfferLaw:
    """某一体制下单类劳动者的成功匹配过程。"""

    match_rate: float
    share_p: float
    thresholds: dict
    survivals: dict

    @classmethod
    def build(cls, worker: Worker, eq: Equilibrium, G: DistributionSpec) -> "_OfferLaw":
        params = eq.params
        weights = {"P": params.p, "N": 1.0 - params.p}
        thresholds = {firm: acceptance_threshold(worker, firm, eq) for firm in FIRMS}
        survivals = {firm: G.sf(thresholds[firm]) for firm in FIRMS}
        accept = sum(weights[firm] * survivals[firm] for firm in FIRMS)
        share_p = weights["P"] * survivals["P"] / accept if accept > 0.0 else 0.0
        return cls(
            match_rate=params.arrival_rate(worker) * accept,
            share_p=share_p,
            thresholds=thresholds,
            survivals=survivals,
        )


# ============================================================
# 模拟
# ============================================================


class _LaborMarket:
    """simpy 环境 + 按时刻选取的体制（均衡阈值与成功匹配过程）。"""

    def __init__(
        self,
        G: DistributionSpec,
        eq: Equilibrium,
        burn_in: float,
        horizon: float,
        post_eq: Optional[Equilibrium] = None,
        shift_time: Optional[float] = None,
    ) -> None:
        self.env = simpy.Environment()
        self.G = G
        self.burn_in = burn_in
        self.horizon = horizon
        self.shift_time = shift_time
        self._regimes = [(eq, {worker: _OfferLaw.build(worker, eq, G) for worker in WORKERS})]
        if post_eq is not None:
            self._regimes.append((post_eq, {worker: _OfferLaw.build(worker, post_eq, G) for worker in WORKERS}))
        self.agents: list[AgentState] = []
        self.wages: dict = {(w, f): [] for w in WORKERS for f in FIRMS}

    # ------------------------------------------------------------------
    # 体制
    # ------------------------------------------------------------------

    def _until_shift(self) -> Optional[float]:
        """距体制切换的时间；未安排或已切换时为 None。"""
        if self.shift_time is None or self.env.now >= self.shift_time:
            return None
        return self.shift_time - self.env.now

    @property
    def _regime(self) -> tuple[Equilibrium, dict]:
        return self._regimes[0] if self.shift_time is None or self._until_shift() is not None else self._regimes[1]

    @property
    def eq(self) -> Equilibrium:
        return self._regime[0]

    @property
    def offers(self) -> dict:
        return self._regime[1]

    # ------------------------------------------------------------------
    # 时间记账
    # ------------------------------------------------------------------

    def _overlap(self, start: float, end: float) -> float:
        return max(0.0, min(end, self.horizon) - max(start, self.burn_in))

    def transition(self, agent: AgentState, status: Status, firm: Optional[Firm] = None,
                   x: Optional[float] = None, pay: Optional[float] = None) -> None:
        now = self.env.now
        spent = self._overlap(agent.since, now)
        agent.time_in[agent.status] += spent
        if agent.status == "employed":
            agent.time_by_firm[agent.firm] += spent
        counted = now >= self.burn_in
        if agent.status == "unemployed" and status == "employed" and counted:
            agent.job_finds += 1
            self.wages[(agent.worker, firm)].append(pay)
        if agent.status == "employed" and status == "unemployed" and counted:
            agent.separations += 1
        agent.status = status
        agent.since = now
        agent.firm, agent.x, agent.wage = firm, x, pay

    def finalize(self) -> None:
        for agent in self.agents:
            spent = self._overlap(agent.since, self.horizon)
            agent.time_in[agent.status] += spent
            if agent.status == "employed":
                agent.time_by_firm[agent.firm] += spent
            agent.since = self.horizon

    # ------------------------------------------------------------------
    # 进程
    # ------------------------------------------------------------------

    def _reassess(self, agent: AgentState) -> None:
        joins = participation_decision(agent.z, agent.worker, self.eq)
        if agent.status == "non_participant" and joins:
            self.transition(agent, "unemployed")
        elif agent.status == "unemployed" and not joins:
            self.transition(agent, "non_participant")

    def _match(self, agent: AgentState, offer: _OfferLaw, draws: _AgentDraws) -> None:
        firm: Firm = "P" if draws.uniform() < offer.share_p else "N"
        x = draws.productivity_above(offer.thresholds[firm], offer.survivals[firm])
        self.transition(agent, "employed", firm=firm, x=x, pay=wage(x, agent.worker, firm, self.eq))

    def lifecycle(self, agent: AgentState, draws: _AgentDraws):
        env = self.env
        while True:
            if agent.status == "employed":
                # 等待工作破坏，之后按当前体制重新决定是否参与
                yield env.timeout(draws.exponential(self.eq.params.eta))
                self.transition(agent, "unemployed")
                self._reassess(agent)
                continue

            offer = self.offers[agent.worker]
            wait = self._until_shift()
            if agent.status == "non_participant" or offer.match_rate <= 0.0:
                if wait is None:
                    return
                yield env.timeout(wait)
                self._reassess(agent)
                continue

            delay = draws.exponential(offer.match_rate)
            if wait is not None and delay >= wait:
                # 指数时钟无记忆：切换时刻按新体制重新抽取
                yield env.timeout(wait)
                self._reassess(agent)
                continue
            yield env.timeout(delay)
            self._match(agent, offer, draws)


# ============================================================
# 统计量
# ============================================================


def _ratio_estimate(numerator: np.ndarray, denominator: np.ndarray) -> Estimate:
    """比率估计 Σy/Σx，标准误用跨个体的 delta 方法。"""
    mask = denominator > 0
    y, x = numerator[mask], denominator[mask]
    n = int(mask.sum())
    if n == 0:
        return Estimate(value=math.nan, se=math.nan, n=0)
    ratio = float(y.sum() / x.sum())
    if n == 1:
        return Estimate(value=ratio, se=math.nan, n=1)
    deviations = y - ratio * x
    se = math.sqrt(float(np.sum(deviations ** 2)) / (n * (n - 1))) / float(x.mean())
    return Estimate(value=ratio, se=se, n=n)


def _mean_estimate(values: list) -> Estimate:
    n = len(values)
    if n == 0:
        return Estimate(value=math.nan, se=math.nan, n=0)
    array = np.asarray(values, dtype=float)
    se = float(array.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return Estimate(value=float(array.mean()), se=se, n=n)


def _rate_estimate(events: int, exposure: float) -> Estimate:
    if exposure <= 0:
        return Estimate(value=math.nan, se=math.nan, n=events)
    return Estimate(value=events / exposure, se=math.sqrt(events) / exposure, n=events)


def _worker_stats(market: _LaborMarket, worker: Worker) -> WorkerSimStats:
    agents = [a for a in market.agents if a.worker == worker]
    unemployed = np.array([a.time_in["unemployed"] for a in agents])
    employed = np.array([a.time_in["employed"] for a in agents])
    window = np.array([sum(a.time_in.values()) for a in agents])
    at_unprejudiced = np.array([a.time_by_firm["N"] for a in agents])

    wages_by_firm = {firm: _mean_estimate(market.wages[(worker, firm)]) for firm in FIRMS}
    all_wages = market.wages[(worker, "N")] + market.wages[(worker, "P")]
    return WorkerSimStats(
        unemployment_rate=_ratio_estimate(unemployed, unemployed + employed),
        participation_rate=_ratio_estimate(unemployed + employed, window),
        job_finding_rate=_rate_estimate(sum(a.job_finds for a in agents), float(unemployed.sum())),
        separation_rate=_rate_estimate(sum(a.separations for a in agents), float(employed.sum())),
        mean_wage=_mean_estimate(all_wages),
        mean_wage_by_firm=wages_by_firm,
        min_wage=min(all_wages) if all_wages else math.nan,
        segregation_share=_ratio_estimate(at_unprejudiced, employed) if worker == "G" else None,
    )


# ============================================================
# 入口
# ============================================================


def simulate_steady_state(
    params: ModelParams,
    G: DistributionSpec,
    Q: DistributionSpec,
    eq: Equilibrium,
    n_agents: int,
    horizon: float,
    burn_in: float,
    seed: int,
    post_eq: Optional[Equilibrium] = None,
    shift_time: Optional[float] = None,
) -> SimStats:
    """模拟两类劳动者各 n_agents 人，统计预热期之后的时间平均量。

    Args:
        params: 模型参数（必须与 eq 对应）
        G: 生产率分布
        Q: 非参与价值分布
        eq: 已求解的均衡，提供接受阈值与保留价值
        n_agents: 每类劳动者的人数
        horizon: 模拟终止时间
        burn_in: 预热期长度，0 ≤ burn_in < horizon
        seed: 非负整数随机种子
        post_eq: 可选的切换后均衡
        shift_time: 体制切换时刻（与 post_eq 同时给出）

    Raises:
        ValueError: 参数不合法

    Returns:
        SimStats
    """
    if eq.params != params:
        raise ValueError("均衡与参数不一致：请先用同一组参数求解均衡")
    if not (isinstance(seed, (int, np.integer)) and seed >= 0):
        raise ValueError(f"随机种子必须是非负整数，收到 {seed}")
    if not (0.0 <= burn_in < horizon) or not math.isfinite(horizon):
        raise ValueError(f"需要 0 ≤ burn_in < horizon，收到 burn_in={burn_in}, horizon={horizon}")
    if n_agents < 1:
        raise ValueError(f"n_agents 必须 ≥ 1，收到 {n_agents}")
    if (post_eq is None) != (shift_time is None):
        raise ValueError("post_eq 与 shift_time 必须同时给出")
    if shift_time is not None and not (0.0 <= shift_time < horizon):
        raise ValueError(f"shift_time 必须在 [0, horizon) 内，收到 {shift_time}")

    market = _LaborMarket(G, eq, burn_in=burn_in, horizon=horizon, post_eq=post_eq, shift_time=shift_time)
    for worker_index, worker in enumerate(WORKERS):
        for agent_index in range(n_agents):
            rng = agent_rng(seed, worker_index, agent_index)
            z = float(Q.sample(1, rng)[0])
            status: Status = "unemployed" if participation_decision(z, worker, market.eq) else "non_participant"
            agent = AgentState(worker=worker, z=z, status=status)
            market.agents.append(agent)
            market.env.process(market.lifecycle(agent, _AgentDraws(rng, G)))
    if shift_time is not None:
        logger.info("t=%.3f 安排体制切换：阈值更新，参与决策重新评估", shift_time)

    market.env.run(until=horizon)
    market.finalize()

    total_time = float(sum(sum(a.time_in.values()) for a in market.agents))
    logger.info("模拟完成: %d 个劳动者, 统计窗口 [%.1f, %.1f]", len(market.agents), burn_in, horizon)
    return SimStats(
        g=_worker_stats(market, "G"),
        s=_worker_stats(market, "S"),
        total_agent_time=total_time,
        metadata={
            "n_agents_per_type": n_agents,
            "horizon": horizon,
            "burn_in": burn_in,
            "seed": int(seed),
            "rng": "SeedSequence(seed, spawn_key=(worker_index, agent_index)), worker_index: G=0, S=1",
            "regime_shift_time": shift_time,
        },
    )
