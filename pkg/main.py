"""
劳动市场歧视的搜寻匹配模型：命令行入口

子命令：
  solve       求解稳态均衡
  sweep       单参数比较静态扫描
  verify      检验命题 2–4 的比较静态方向
  simulate    事件驱动模拟并与解析均衡比较
  gen-panel   生成合成 DiD 面板
  estimate    在面板 CSV 上估计 DiD / 事件研究 / 三重差分
  pipeline    校准 → 生成 → 估计 → 安慰剂
  placebo     零效应场景的拒绝率

退出码：0 成功，1 用法 / 配置错误，2 数值不收敛，3 数据校验失败
"""
import argparse
import logging
import os
import sys

# 将项目根目录添加到 Python 路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from config import settings

# ============================================================
# 日志配置
# ============================================================
logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
for _name in settings.PROJECT_LOGGERS:
    logging.getLogger(_name).setLevel(settings.PROJECT_LOG_LEVEL.upper())


COMMANDS = ("solve", "sweep", "verify", "simulate", "gen-panel", "estimate", "pipeline", "placebo")


def dispatch(command: str):
    """子命令名 → 实现函数。"""
    from workflow import commands
    from workflow.orchestrator import run_pipeline

    return {
        "solve": commands.cmd_solve,
        "sweep": commands.cmd_sweep,
        "verify": commands.cmd_verify_propositions,
        "simulate": commands.cmd_simulate,
        "gen-panel": commands.cmd_gen_panel,
        "estimate": commands.cmd_estimate,
        "pipeline": run_pipeline,
        "placebo": commands.cmd_placebo,
    }[command]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="劳动市场歧视的搜寻匹配模型：均衡、模拟与双重差分",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "示例:\n"
            "  python main.py solve --config config/presets/base.json\n"
            "  python main.py verify --config config/presets/verify.json --jobs 4\n"
            "  python main.py pipeline --config config/presets/pipeline.json --out output/pipeline\n"
        ),
    )
    parser.add_argument("command", choices=COMMANDS, help="子命令")
    parser.add_argument("--config", default=None, help="JSON 运行配置路径（省略时全部使用默认值）")
    parser.add_argument("--out", default=None, help=f"输出目录 (默认 {settings.OUTPUT_DIR}/<子命令>)")
    parser.add_argument("--seed", type=int, default=None, help="随机种子，覆盖配置文件")
    parser.add_argument("--jobs", type=int, default=None, help="并行进程数，覆盖配置文件")
    parser.add_argument("--tolerance", type=float, default=None, help="均衡求解容差，覆盖配置文件")
    return parser


def run(argv: list[str]) -> int:
    """执行一次命令，返回退出码。"""
    from config.run_config import load_run_config
    from utils.errors import ModelError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1

    try:
        config = load_run_config(
            args.config,
            overrides={"seed": args.seed, "jobs": args.jobs, "tolerance": args.tolerance, "output_dir": args.out},
        )
        out_dir = config.output_dir or os.path.join(settings.OUTPUT_DIR, args.command)
        os.makedirs(out_dir, exist_ok=True)
        dispatch(args.command)(config, out_dir)
    except ModelError as e:
        print(f"[错误] {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"[错误] 参数不合法: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\n\n[中断] 用户取消了运行。", file=sys.stderr)
        return 1

    print(f"\n[完成] 结果已写入 {out_dir}")
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
