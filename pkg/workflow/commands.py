"""
命令行子命令的实现

每个 cmd_* 接收已校验的 RunConfig 与输出目录，打印人类可读的结果，
写出 JSON / CSV 以及 manifest.json，并返回一个摘要字典。
"""
import logging
import math
import os
from typing import Optional

import pandas as pd

from config.run_config import RunConfig
from econometrics.design import RegressionSpec
from econometrics.estimators import RegressionResult, estimate_ddd, estimate_did, estimate_event_study
from econometrics.replication import placebo_suite
from model.distributions import DistributionSpec
from model.equilibrium import solve_equilibrium
from model.params import FIRMS, WORKERS, Equilibrium, ModelParams
from model.statics import SweepResult, comparative_statics_sweep
from model.wages import mean_accepted_wage, mean_accepted_wage_by_firm
from simulator.calibration import CalibrationResult, calibrate_shock
from simulator.panel import BASE_COLUMNS, PanelDataset, PanelScenario, generate_panel
from simulator.steady_state import simulate_steady_state
from tools.file_tools import write_csv, write_json, write_manifest
from utils.errors import ConfigError, ConvergenceError, ModelError

logger = logging.getLogger(__name__)

# 命题与 (扫描参数, 指标) 的对应关系
PROPOSITIONS: dict[str, list[tuple[str, str]]] = {
    "proposition_2": [("d", "unemployment_g"), ("d", "mean_wage_g"), ("d", "participation_g")],
    "proposition_3": [("lambda_g", "unemployment_g"), ("lambda_g", "mean_wage_g"), ("lambda_g", "participation_g")],
    "proposition_4": [("d", "segregation_share")],
}


# ============================================================
# 公共步骤
# ============================================================


def banner(title: str) -> None:
    print()
    print("=" * 60)
    print(f"  {title}")
    print("=" * 60)


def resolved_config(config: RunConfig) -> dict:
    return config.model_dump(mode="json", exclude={"output_dir"})


def model_inputs(config: RunConfig) -> tuple[ModelParams, DistributionSpec, DistributionSpec]:
    params = config.model.params.build()
    G, Q = config.model.distributions(params, tol=config.tolerance)
    return params, G, Q


def safe_mean_wage(worker, eq: Equilibrium, params: ModelParams, G: DistributionSpec) -> Optional[float]:
    try:
        return mean_accepted_wage(worker, eq, params, G)
    except ModelError:
        return None


def equilibrium_table(eq: Equilibrium, G: DistributionSpec) -> pd.DataFrame:
    rows = []
    for worker in WORKERS:
        outcome = eq.worker(worker)
        rows.append({
            "worker": worker,
            "v": outcome.reservation_value,
            "u": outcome.unemployment_rate,
            "l": outcome.participation_rate,
            "e": outcome.employment_share,
            "accept": outcome.acceptance_probability,
            "mean_wage": safe_mean_wage(worker, eq, eq.params, G),
        })
    return pd.DataFrame(rows)


def resolve_shock(config: RunConfig, params: ModelParams, G: DistributionSpec,
                  Q: DistributionSpec) -> tuple[ModelParams, Optional[CalibrationResult]]:
    """按 shock 配置得到处理后参数：校准目标效应、直接给值，或不施加冲击。"""
    shock = config.shock
    if shock.target_effect is not None:
        calibration = calibrate_shock(
            params, G, Q, shock.target_effect, knob=shock.knob, outcome=shock.outcome, bound=shock.bound,
            solver_tol=config.tolerance,
        )
        return calibration.post_params, calibration
    if shock.post_value is not None:
        return params.with_value(shock.knob, shock.post_value), None
    return params, None


def build_scenario(config: RunConfig, pre: ModelParams, post: ModelParams,
                   G: DistributionSpec, Q: DistributionSpec) -> PanelScenario:
    try:
        return config.scenario.build(pre, post, G, Q, seed=config.seed, solver_tol=config.tolerance)
    except ValueError as e:
        raise ConfigError(f"scenario: {e}") from e


def regression_spec(config: RunConfig, **overrides) -> RegressionSpec:
    try:
        return config.regression.build(**overrides)
    except ValueError as e:
        raise ConfigError(f"regression: {e}") from e


def run_estimator(panel, spec: RegressionSpec) -> RegressionResult:
    if spec.group is not None:
        return estimate_ddd(panel, spec)
    if spec.event_study:
        return estimate_event_study(panel, spec)
    return estimate_did(panel, spec)


def print_result(result: RegressionResult) -> None:
    table = result.to_frame(key_only=True)
    print(table.to_string(index=False, float_format=lambda x: f"{x:.6f}"))
    print(f"  N = {result.nobs}, 聚类数 = {result.n_clusters}, 吸收的虚拟变量 = {result.n_absorbed}")
    if result.dropped:
        print(f"  [共线剔除] {', '.join(result.dropped)}")


# ============================================================
# solve
# ============================================================


def cmd_solve(config: RunConfig, out_dir: str) -> dict:
    """求解稳态均衡并输出两类劳动者的结果表。"""
    params, G, Q = model_inputs(config)
    eq = solve_equilibrium(params, G, Q, tol=config.tolerance)
    table = equilibrium_table(eq, G)

    banner("稳态均衡")
    print(table.to_string(index=False, float_format=lambda x: f"{x:.6f}"))
    share = eq.segregation_share
    print(f"  P_GN = {share:.6f}" if share is not None else "  P_GN 无定义（少数群体不会被雇用）")

    summary = {
        "equilibrium": eq.to_dict(),
        "mean_wage": {row["worker"]: row["mean_wage"] for row in table.to_dict(orient="records")},
        "distributions": {"G": G.to_dict(), "Q": Q.to_dict()},
    }
    write_json("equilibrium.json", summary, out_dir)
    write_csv("equilibrium.csv", table, out_dir)
    write_manifest("solve", resolved_config(config), out_dir)
    return summary


# ============================================================
# sweep / verify
# ============================================================


def normalized_grid(grid: list[float]) -> list[float]:
    """排序并去重，保证扫描网格严格递增。"""
    return sorted({float(v) for v in grid})


def _run_sweep(config: RunConfig, parameter: str, grid: list[float]) -> SweepResult:
    params, G, Q = model_inputs(config)
    return comparative_statics_sweep(
        params, G, Q, parameter, normalized_grid(grid), tol=config.tolerance, jobs=config.jobs,
    )


def _raise_on_failures(results: list[SweepResult]) -> None:
    failed = {r.parameter: r.failed_points for r in results if r.failed_points}
    if failed:
        raise ConvergenceError(f"以下网格点求解失败: {failed}")


def cmd_sweep(config: RunConfig, out_dir: str) -> dict:
    """单参数比较静态扫描。"""
    parameter = config.sweep.parameter
    result = _run_sweep(config, parameter, config.sweep.grid)
    frame = result.to_frame()

    banner(f"比较静态扫描: {parameter}")
    print(frame.to_string(index=False, float_format=lambda x: f"{x:.6f}"))
    for metric, ok in result.verdicts.items():
        print(f"  [{'通过' if ok else '未通过'}] {metric}")

    write_json(f"sweep_{parameter}.json", result.to_dict(), out_dir)
    write_csv(f"sweep_{parameter}.csv", frame, out_dir)
    write_manifest("sweep", resolved_config(config), out_dir)
    _raise_on_failures([result])
    return result.to_dict()


def cmd_verify_propositions(config: RunConfig, out_dir: str) -> dict:
    """在 d 与 λ_G 两个网格上检验命题 2–4 预测的方向。"""
    results = {
        "d": _run_sweep(config, "d", config.verify.d_grid),
        "lambda_g": _run_sweep(config, "lambda_g", config.verify.lambda_g_grid),
    }
    report = {}
    for proposition, checks in PROPOSITIONS.items():
        verdicts = {f"{parameter}:{metric}": results[parameter].verdicts[metric] for parameter, metric in checks}
        report[proposition] = {"passed": all(verdicts.values()), "checks": verdicts}

    banner("命题检验")
    for proposition, entry in report.items():
        print(f"  [{'通过' if entry['passed'] else '未通过'}] {proposition}")
        for check, ok in entry["checks"].items():
            print(f"      {'✓' if ok else '✗'} {check}")

    for parameter, result in results.items():
        frame = result.to_frame()
        write_csv(f"verify_{parameter}.csv", frame, out_dir)
        if config.verify.plot:
            from utils.plotting import plot_sweep

            plot_sweep(frame, parameter, os.path.join(out_dir, f"verify_{parameter}.png"))
    summary = {
        "all_passed": all(entry["passed"] for entry in report.values()),
        "propositions": report,
        "sweeps": {parameter: result.to_dict() for parameter, result in results.items()},
    }
    write_json("verify.json", summary, out_dir)
    write_manifest("verify", resolved_config(config), out_dir)
    _raise_on_failures(list(results.values()))
    return summary


# ============================================================
# simulate
# ============================================================


def _analytic_targets(eq: Equilibrium, G: DistributionSpec) -> dict:
    targets = {}
    for worker in WORKERS:
        outcome = eq.worker(worker)
        entry = {
            "unemployment_rate": outcome.unemployment_rate,
            "participation_rate": outcome.participation_rate,
            "job_finding_rate": eq.params.arrival_rate(worker) * outcome.acceptance_probability,
            "separation_rate": eq.params.eta,
            "mean_wage": safe_mean_wage(worker, eq, eq.params, G),
        }
        for firm in FIRMS:
            try:
                entry[f"mean_wage_{firm}"] = mean_accepted_wage_by_firm(worker, firm, eq, G)
            except ModelError:
                entry[f"mean_wage_{firm}"] = None
        targets[worker] = entry
    targets["G"]["segregation_share"] = eq.segregation_share
    return targets


def cmd_simulate(config: RunConfig, out_dir: str) -> dict:
    """事件驱动模拟，并与解析均衡逐项比较（3 个蒙特卡洛标准误）。"""
    params, G, Q = model_inputs(config)
    sim = config.simulation
    eq = solve_equilibrium(params, G, Q, tol=config.tolerance)
    post_eq = None
    if sim.post_params is not None:
        post_eq = solve_equilibrium(sim.post_params.build(), G, Q, tol=config.tolerance)
    stats = simulate_steady_state(
        params, G, Q, eq, n_agents=sim.n_agents, horizon=sim.horizon, burn_in=sim.burn_in,
        seed=config.seed, post_eq=post_eq, shift_time=sim.shift_time,
    )
    targets = _analytic_targets(post_eq or eq, G)

    rows = []
    for worker in WORKERS:
        worker_stats = stats.worker(worker)
        estimates = {
            "unemployment_rate": worker_stats.unemployment_rate,
            "participation_rate": worker_stats.participation_rate,
            "job_finding_rate": worker_stats.job_finding_rate,
            "separation_rate": worker_stats.separation_rate,
            "mean_wage": worker_stats.mean_wage,
        }
        for firm in FIRMS:
            estimates[f"mean_wage_{firm}"] = worker_stats.mean_wage_by_firm[firm]
        if worker == "G":
            estimates["segregation_share"] = worker_stats.segregation_share
        for metric, estimate in estimates.items():
            target = targets[worker].get(metric)
            defined = target is not None and estimate.n > 0 and not math.isnan(estimate.value)
            rows.append({
                "worker": worker,
                "metric": metric,
                "simulated": estimate.value,
                "se": estimate.se,
                "analytic": target,
                "within_3se": estimate.within(target) if defined else None,
            })
    comparison = pd.DataFrame(rows)

    banner("模拟 vs 解析")
    print(comparison.to_string(index=False, float_format=lambda x: f"{x:.6f}"))

    summary = {"simulation": stats.to_dict(), "analytic": targets, "comparison": comparison.to_dict(orient="records")}
    write_json("simulation.json", summary, out_dir)
    write_csv("simulation_comparison.csv", comparison, out_dir)
    write_manifest("simulate", resolved_config(config), out_dir)
    return summary


# ============================================================
# gen-panel / estimate / placebo
# ============================================================


def cmd_gen_panel(config: RunConfig, out_dir: str) -> dict:
    """生成（可选校准冲击后的）DiD 面板。"""
    params, G, Q = model_inputs(config)
    post, calibration = resolve_shock(config, params, G, Q)
    panel = generate_panel(build_scenario(config, params, post, G, Q))

    banner("合成面板")
    analytic = panel.metadata["analytic"]
    print(f"  行数: {len(panel.frame)}")
    print(f"  e_G 处理前/后: {analytic['employment_pre']['G']:.6f} / {analytic['employment_post']['G']:.6f}")
    print(f"  真实效应 Δ(both_working): {analytic['both_working_effect']:.6f}")

    panel.to_csv(os.path.join(out_dir, "panel.csv"))
    metadata = dict(panel.metadata)
    if calibration is not None:
        metadata["calibration"] = calibration.to_dict()
    write_json("panel_metadata.json", metadata, out_dir)
    write_manifest("gen-panel", resolved_config(config), out_dir)
    return metadata


def load_panel(path: str, covariates: tuple[str, ...] = ()) -> pd.DataFrame:
    """读取面板 CSV；列齐全时按面板模式校验。"""
    if not os.path.exists(path):
        raise ConfigError(f"panel_path 指向的文件不存在: {path}")
    panel = PanelDataset.from_csv(path, covariates=covariates)
    if set(BASE_COLUMNS).issubset(panel.frame.columns):
        panel.validate()
    return panel.frame


def cmd_estimate(config: RunConfig, out_dir: str) -> dict:
    """在给定面板上估计 DiD / 事件研究 / 三重差分。"""
    if config.panel_path is None:
        raise ConfigError("panel_path: estimate 命令需要面板 CSV 路径")
    spec = regression_spec(config)
    frame = load_panel(config.panel_path, tuple(c for c in spec.covariates))
    result = run_estimator(frame, spec)

    banner(f"回归结果 ({result.kind})")
    print_result(result)

    write_json("estimate.json", result.to_dict(), out_dir)
    write_csv("coefficients.csv", result.to_frame(), out_dir)
    write_manifest("estimate", resolved_config(config), out_dir)
    return result.to_dict()


def cmd_placebo(config: RunConfig, out_dir: str) -> dict:
    """零效应场景的安慰剂检验：名义水平下的拒绝率。"""
    params, G, Q = model_inputs(config)
    scenario = build_scenario(config, params, params, G, Q)
    spec = regression_spec(config)
    replication = config.replication
    report, replications = placebo_suite(
        scenario, spec, replication.n_reps, level=replication.level, estimator=replication.estimator,
        seed=config.seed, jobs=config.jobs,
    )

    banner("安慰剂检验")
    print(f"  系数: {report.coefficient}, 重复 {report.n_reps} 次, 名义水平 {report.level}")
    print(f"  拒绝率: {report.rejection_rate:.4f} (95% CI [{report.ci_low:.4f}, {report.ci_high:.4f}])")
    print(f"  β̂ 均值 {report.mean_estimate:.6f}, 经验标准差 {report.sd_estimate:.6f}, 平均聚类标准误 {report.mean_se:.6f}")

    write_json("placebo.json", report.to_dict(), out_dir)
    write_csv("placebo_replications.csv", replications, out_dir)
    write_manifest("placebo", resolved_config(config), out_dir)
    return report.to_dict()
