"""
纳什议价工资、接受阈值与价值函数

工资 w_JI(x) = α(x − d·𝟙{G,P}) + (1−α)·v_J
当且仅当 x ≥ v_J + d·𝟙{G,P} 时会面形成匹配（等价于 V_J[w] ≥ U_J）。
"""
from model.distributions import DistributionSpec, partial_expectation
from model.params import FIRMS, Equilibrium, Firm, ModelParams, Worker
from utils.errors import NoEmploymentError


def acceptance_threshold(worker: Worker, firm: Firm, eq: Equilibrium) -> float:
    """匹配生产率的接受阈值 v_J + d·𝟙{worker=G ∧ firm=P}。"""
    return eq.reservation_value(worker) + eq.params.disutility(worker, firm)


def wage(x: float, worker: Worker, firm: Firm, eq: Equilibrium) -> float:
    """纳什议价工资。

    Raises:
        ValueError: 对不可接受的匹配调用（x 低于接受阈值）
    """
    threshold = acceptance_threshold(worker, firm, eq)
    if x < threshold:
        raise ValueError(
            f"匹配不可接受: x={x:.6g} < 阈值 {threshold:.6g} (劳动者 {worker}, 雇主 {firm})"
        )
    alpha = eq.params.alpha
    return alpha * (x - eq.params.disutility(worker, firm)) + (1.0 - alpha) * eq.reservation_value(worker)


# ============================================================
# 价值函数
# ============================================================


def nonparticipation_value(z: float, params: ModelParams) -> float:
    """NP_J(z) = z / ρ"""
    return z / params.rho


def unemployment_value(worker: Worker, eq: Equilibrium) -> float:
    """U_J = v_J / ρ"""
    return eq.reservation_value(worker) / eq.params.rho


def employment_value(w: float, worker: Worker, eq: Equilibrium) -> float:
    """V_J[w] = (w + η·U_J) / (ρ + η)"""
    params = eq.params
    return (w + params.eta * unemployment_value(worker, eq)) / (params.rho + params.eta)


def participation_decision(z: float, worker: Worker, eq: Equilibrium) -> bool:
    """z < v_J 时参与劳动力市场（NP_J(z) < U_J）；相等时不参与。"""
    return z < eq.reservation_value(worker)


# ============================================================
# 平均接受工资
# ============================================================


def mean_accepted_wage_by_firm(worker: Worker, firm: Firm, eq: Equilibrium, G: DistributionSpec) -> float:
    """给定雇主类型、在可接受匹配上的平均工资：v + α·PE(t)/(1−G(t))。"""
    threshold = acceptance_threshold(worker, firm, eq)
    survival = G.sf(threshold)
    if survival <= 0.0:
        raise NoEmploymentError(f"劳动者 {worker} 在雇主 {firm} 处没有可接受的匹配")
    return eq.reservation_value(worker) + eq.params.alpha * partial_expectation(G, threshold) / survival


def mean_accepted_wage(worker: Worker, eq: Equilibrium, params: ModelParams, G: DistributionSpec) -> float:
    """所有被接受会面上的平均工资（雇主类型按 p, 1−p 混合）。

    对阈值 t 之上的 x，w(x) = v + α(x − t)，于是
      E[w | 接受] = v + α·[p·PE(t_P) + (1−p)·PE(t_N)] / [p·S(t_P) + (1−p)·S(t_N)]

    Raises:
        NoEmploymentError: 接受概率为 0
    """
    weights = {"P": params.p, "N": 1.0 - params.p}
    surplus = 0.0
    mass = 0.0
    for firm in FIRMS:
        threshold = acceptance_threshold(worker, firm, eq)
        surplus += weights[firm] * partial_expectation(G, threshold)
        mass += weights[firm] * G.sf(threshold)
    if mass <= 0.0:
        raise NoEmploymentError(f"劳动者 {worker} 没有可接受的匹配，平均工资无定义")
    return eq.reservation_value(worker) + params.alpha * surplus / mass


# ============================================================
# 家庭层面的结果映射
# ============================================================


def employment_probability(eq: Equilibrium, worker: Worker = "G") -> float:
    """单个伴侣就业的概率 e_J = l_J·(1 − u_J)。"""
    return eq.worker(worker).employment_share


def both_working_probability(eq: Equilibrium, worker: Worker = "G") -> float:
    """两个伴侣都就业的概率 e_J²（假设伴侣之间相互独立）。"""
    return employment_probability(eq, worker) ** 2


OUTCOME_MAPS = {
    "both_working": both_working_probability,
    "employment": employment_probability,
}
