"""
端到端流水线编排器：分阶段执行

4 个阶段：
  Stage 1 冲击校准：在 d（或 λ_G）上求根，使 both_working 概率变化 Δ
  Stage 2 面板生成：交错处理的 州×年份 面板
  Stage 3 估计：DiD 与事件研究；可选多次重复的恢复实验
  Stage 4 安慰剂：零效应场景下的拒绝率（placebo_reps > 0 时）

任一阶段失败时，异常保持原类型（对应退出码），消息前加上阶段标签。
"""
import logging
import os
from contextlib import contextmanager
from dataclasses import replace
from typing import Optional

from config.run_config import RunConfig
from econometrics.estimators import estimate_did, estimate_event_study
from econometrics.replication import placebo_suite, run_replications, summarize_replications
from simulator.panel import generate_panel
from tools.file_tools import write_csv, write_json, write_manifest
from utils.errors import ModelError
from workflow.commands import (
    banner,
    build_scenario,
    model_inputs,
    print_result,
    regression_spec,
    resolve_shock,
    resolved_config,
)

logger = logging.getLogger(__name__)

STAGES = ("冲击校准", "面板生成", "估计", "安慰剂检验")


@contextmanager
def stage(index: int):
    """打印阶段标题；阶段内的 ModelError 加上阶段标签后原样抛出。"""
    label = f"阶段 {index}/{len(STAGES)} {STAGES[index - 1]}"
    print(f"\n[{label}] ...")
    try:
        yield
    except ModelError as e:
        e.args = (f"[{label}] {e}",) + e.args[1:]
        raise


def analytic_effect(metadata: dict, outcome: str, hours_per_worker: float) -> Optional[float]:
    """结构模型隐含的真实效应；不对应模型结果的列返回 None。"""
    analytic = metadata["analytic"]
    if outcome == "both_working":
        return analytic["both_working_effect"]
    if outcome == "hours_total":
        return 2.0 * hours_per_worker * analytic["employment_effect"]
    return None


def run_pipeline(config: RunConfig, out_dir: str) -> dict:
    """校准 → 生成 → 估计 → 安慰剂，写出中间 CSV 与 summary.json。"""
    pipeline = config.pipeline
    summary: dict = {}
    # 回归设定在计算开始前校验
    did_spec = regression_spec(config, leads=0, lags=0, group=None)
    event_spec = None
    if pipeline.leads or pipeline.lags:
        event_spec = regression_spec(config, leads=pipeline.leads, lags=pipeline.lags, group=None)

    with stage(1):
        params, G, Q = model_inputs(config)
        post, calibration = resolve_shock(config, params, G, Q)
        if calibration is not None:
            summary["calibration"] = calibration.to_dict()
            print(f"  {calibration.knob}: {getattr(params, calibration.knob):.6f} → "
                  f"{getattr(post, calibration.knob):.6f}，效应 {calibration.achieved_effect:.6f}")

    with stage(2):
        scenario = build_scenario(config, params, post, G, Q)
        panel = generate_panel(scenario)
        panel.to_csv(os.path.join(out_dir, "panel.csv"))
        write_json("panel_metadata.json", panel.metadata, out_dir)
        truth = analytic_effect(panel.metadata, config.regression.outcome, scenario.hours_per_worker)
        summary["analytic_effect"] = truth
        print(f"  {len(panel.frame)} 行，解析效应 Δ = {truth}")

    with stage(3):
        did = estimate_did(panel, did_spec)
        print_result(did)
        write_csv("did_coefficients.csv", did.to_frame(), out_dir)
        summary["did"] = did.to_dict()
        estimate, se, _ = did.coefficient(did.treatment_name)
        summary["beta_vs_delta"] = {
            "beta_hat": estimate,
            "se": se,
            "delta": truth,
            "difference": None if truth is None else estimate - truth,
        }

        if event_spec is not None:
            event = estimate_event_study(panel, event_spec)
            print_result(event)
            table = event.to_frame(key_only=True)
            write_csv("event_study_coefficients.csv", table, out_dir)
            summary["event_study"] = event.to_dict()
            if pipeline.plot:
                from utils.plotting import plot_event_study

                order = (
                    event.column_map.get("leads", []) + [event.treatment_name] + event.column_map.get("lags", [])
                )
                window = table.set_index("name").loc[order].reset_index()
                plot_event_study(window, os.path.join(out_dir, "event_study.png"), 1.0 - pipeline.level)

        if pipeline.recovery_reps > 1:
            replications = run_replications(
                scenario, did_spec, pipeline.recovery_reps, "did", seed=config.seed, jobs=config.jobs,
                coefficients=[did_spec.treatment],
            )
            write_csv("recovery_replications.csv", replications, out_dir)
            table = summarize_replications(replications, truth={did_spec.treatment: truth})
            row = table.iloc[0]
            recovered = truth is not None and abs(row["mean"] - truth) <= pipeline.recovery_tolerance
            summary["recovery"] = {
                "n_reps": int(row["n"]),
                "mean_beta": float(row["mean"]),
                "mc_se": float(row["mc_se"]),
                "sd_beta": float(row["sd"]),
                "mean_cluster_se": float(row["mean_se"]),
                "se_ratio": float(row["se_ratio"]),
                "tolerance": pipeline.recovery_tolerance,
                "recovered": bool(recovered),
                "se_within_factor_2": bool(0.5 <= row["se_ratio"] <= 2.0),
            }
            print(f"  恢复实验: β̂ 均值 {row['mean']:.6f} (Δ = {truth})，"
                  f"{'通过' if recovered else '未通过'}；SE/SD = {row['se_ratio']:.3f}")

    if pipeline.placebo_reps > 0:
        with stage(4):
            null_scenario = replace(scenario, post_params=scenario.pre_params)
            report, replications = placebo_suite(
                null_scenario, did_spec, pipeline.placebo_reps, level=pipeline.level,
                seed=config.seed + 1, jobs=config.jobs,
            )
            write_csv("placebo_replications.csv", replications, out_dir)
            summary["placebo"] = report.to_dict()
            print(f"  拒绝率 {report.rejection_rate:.4f} (95% CI [{report.ci_low:.4f}, {report.ci_high:.4f}])")

    banner("流水线完成")
    beta = summary["beta_vs_delta"]
    print(f"  β̂ = {beta['beta_hat']:.6f} (se {beta['se']:.6f})，解析 Δ = {beta['delta']}")
    write_json("summary.json", summary, out_dir)
    write_manifest("pipeline", resolved_config(config), out_dir)
    return summary
