"""
稳态均衡求解器

  1. 保留价值 v_J = ρU_J 是 v = reservation_rhs(v) 的唯一不动点；
     右端关于 v 严格递减，因此区间 [b, reservation_rhs(b)] 必然包含根，
     先二分再用割线法打磨。
  2. 失业率 u_J = η / (η + λ_J·接受概率)
  3. 参与率 l_J = Q(v_J)
  4. 职业隔离 P_GN = 无偏见雇主雇用的少数群体占比
"""
import logging
import math
import sys
from typing import Optional

from scipy import optimize

from config import settings
from model.distributions import DistributionSpec, partial_expectation
from model.params import Equilibrium, ModelParams, Worker, WorkerOutcome
from utils.errors import ConvergenceError, NoEmploymentError

logger = logging.getLogger(__name__)


# ============================================================
# 保留价值方程
# ============================================================


def surplus_weight(params: ModelParams, worker: Worker) -> float:
    """λ_J·α / (ρ + η)"""
    return params.arrival_rate(worker) * params.alpha / (params.rho + params.eta)


def reservation_rhs(params: ModelParams, G: DistributionSpec, v: float, worker: Worker) -> float:
    """保留价值方程右端。

    b + λ_J α/(ρ+η) · [ p·PE(v + d·𝟙{J=G}) + (1−p)·PE(v) ]

    Args:
        params: 模型参数
        G: 生产率分布
        v: 候选流量价值
        worker: "G" 或 "S"

    Returns:
        右端取值
    """
    if not math.isfinite(v):
        raise ValueError(f"候选保留价值必须是有限值，收到 {v}")
    weight = surplus_weight(params, worker)
    if weight == 0.0:
        return params.b
    shift = params.disutility(worker, "P")
    prejudiced = partial_expectation(G, v + shift)
    unprejudiced = partial_expectation(G, v)
    return params.b + weight * (params.p * prejudiced + (1.0 - params.p) * unprejudiced)


def acceptance_probability(params: ModelParams, G: DistributionSpec, v: float, worker: Worker) -> float:
    """一次会面形成匹配的概率：p·(1−G(v+dI)) + (1−p)·(1−G(v))。"""
    shift = params.disutility(worker, "P")
    return params.p * G.sf(v + shift) + (1.0 - params.p) * G.sf(v)


def solve_reservation_value(
    params: ModelParams,
    G: DistributionSpec,
    worker: Worker,
    tol: Optional[float] = None,
    max_iterations: Optional[int] = None,
) -> tuple[float, int, float]:
    """求解 v_J = reservation_rhs(v_J)。

    Raises:
        ConvergenceError: 迭代预算内未收敛或残差超出容差

    Returns:
        (v_J, 迭代次数, 残差 |v − RHS(v)|)
    """
    tol = settings.SOLVER_TOLERANCE if tol is None else tol
    max_iterations = settings.SOLVER_MAX_ITERATIONS if max_iterations is None else max_iterations

    # λ_J = 0 或 α = 0 时剩余项消失，解析解 v = b
    if surplus_weight(params, worker) == 0.0:
        return params.b, 0, 0.0

    def excess(v: float) -> float:
        return reservation_rhs(params, G, v, worker) - v

    lower = params.b
    upper = reservation_rhs(params, G, lower, worker)
    assert upper >= lower, f"非法区间 [{lower}, {upper}]：右端在 b 处小于 b"

    if excess(lower) <= 0.0:
        return lower, 0, 0.0

    if excess(upper) >= 0.0:
        root, iterations = upper, 0
    else:
        root, info = optimize.bisect(
            excess,
            lower,
            upper,
            xtol=1e-14,
            rtol=max(tol, 4.0 * sys.float_info.epsilon),
            maxiter=max_iterations,
            full_output=True,
            disp=False,
        )
        iterations = info.iterations
        if not info.converged:
            residual = abs(excess(root))
            raise ConvergenceError(
                f"劳动者 {worker} 的保留价值在 {max_iterations} 次迭代内未收敛 (残差 {residual:.3e})",
                residual=residual,
                iterations=iterations,
            )

    if settings.SECANT_POLISH:
        root = _secant_polish(excess, root, lower, upper)

    residual = abs(excess(root))
    allowed = tol * max(1.0, abs(root)) * (1.0 + surplus_weight(params, worker))
    if residual > allowed:
        raise ConvergenceError(
            f"劳动者 {worker} 的保留价值残差 {residual:.3e} 超出容差 {allowed:.1e}",
            residual=residual,
            iterations=iterations,
        )
    logger.debug("v_%s = %.12g (%d 次二分, 残差 %.2e)", worker, root, iterations, residual)
    return root, iterations, residual


def _secant_polish(excess, root: float, lower: float, upper: float) -> float:
    """割线法打磨二分得到的根；结果跑出区间或残差变大时保留原值。"""
    step = max(abs(root), 1.0) * 1e-8
    try:
        polished = optimize.newton(excess, x0=root, x1=min(root + step, upper), tol=1e-15, maxiter=50)
    except (RuntimeError, OverflowError, ZeroDivisionError):
        return root
    if not (lower <= polished <= upper) or not math.isfinite(polished):
        return root
    return polished if abs(excess(polished)) <= abs(excess(root)) else root


# ============================================================
# 均衡
# ============================================================


def _segregation(params: ModelParams, G: DistributionSpec, v_g: float) -> Optional[float]:
    unprejudiced = (1.0 - params.p) * G.sf(v_g)
    denominator = params.p * G.sf(v_g + params.d) + unprejudiced
    if denominator <= 0.0:
        return None
    return min(max(unprejudiced / denominator, 0.0), 1.0)


def solve_worker(
    params: ModelParams,
    G: DistributionSpec,
    Q: DistributionSpec,
    worker: Worker,
    tol: Optional[float] = None,
) -> WorkerOutcome:
    """求解单一劳动者类型的稳态结果。"""
    v, iterations, residual = solve_reservation_value(params, G, worker, tol=tol)
    arrival = params.arrival_rate(worker)
    accept = acceptance_probability(params, G, v, worker)
    if arrival == 0.0 or accept <= 0.0:
        unemployment = 1.0
    else:
        unemployment = params.eta / (params.eta + arrival * accept)
    participation = Q.cdf(v)
    return WorkerOutcome(
        reservation_value=v,
        unemployment_rate=unemployment,
        participation_rate=participation,
        employment_share=participation * (1.0 - unemployment),
        acceptance_probability=accept,
        all_rejection=accept <= 0.0,
        iterations=iterations,
        residual=residual,
    )


def solve_equilibrium(
    params: ModelParams,
    G: DistributionSpec,
    Q: DistributionSpec,
    tol: Optional[float] = None,
) -> Equilibrium:
    """求解两类劳动者的稳态均衡。

    Args:
        params: 模型参数
        G: 匹配生产率分布（有限均值）
        Q: 非参与价值分布
        tol: 不动点相对容差，默认 settings.SOLVER_TOLERANCE

    Raises:
        ConvergenceError: 任一劳动者类型未收敛

    Returns:
        Equilibrium 实例；全部拒绝的均衡合法，u=1 且 all_rejection=True
    """
    outcome_g = solve_worker(params, G, Q, "G", tol=tol)
    outcome_s = solve_worker(params, G, Q, "S", tol=tol)
    if outcome_g.all_rejection:
        logger.warning("少数群体在所有雇主处都被拒绝：u_G = 1，P_GN 未定义")
    return Equilibrium(
        params=params,
        g=outcome_g,
        s=outcome_s,
        segregation_share=_segregation(params, G, outcome_g.reservation_value),
    )


def segregation_share(eq: Equilibrium, params: ModelParams, G: DistributionSpec) -> float:
    """P_GN = (1−p)(1−G(v_G)) / ( p(1−G(v_G+d)) + (1−p)(1−G(v_G)) )

    Raises:
        NoEmploymentError: 两个生存项均为 0（不存在可接受的匹配）
    """
    share = _segregation(params, G, eq.g.reservation_value)
    if share is None:
        raise NoEmploymentError("少数群体在任何雇主处都不会被雇用，P_GN 无定义")
    return share


def default_leisure(params: ModelParams, G: DistributionSpec, scale: Optional[float] = None,
                    tol: Optional[float] = None) -> DistributionSpec:
    """默认非参与价值分布 Q = uniform[0, scale·v_S]（v_S 与 Q 无关）。"""
    scale = settings.LEISURE_SCALE if scale is None else scale
    v_s, _, _ = solve_reservation_value(params, G, "S", tol=tol)
    if not v_s > 0:
        raise ValueError(f"v_S = {v_s} ≤ 0，无法构造默认的非参与价值分布")
    return DistributionSpec.uniform(0.0, scale * v_s, role="leisure")
