"""
静态图（可选）：比较静态曲线与事件研究系数

matplotlib 在函数内导入并使用 Agg 后端，没有安装时调用方得到 ImportError。
"""
import logging
from typing import Optional

import pandas as pd

logger = logging.getLogger(__name__)

SWEEP_PANELS = (
    ("mean_wage_g", "平均工资 w̄_G"),
    ("unemployment_g", "失业率 u_G"),
    ("participation_g", "参与率 l_G"),
    ("segregation_share", "隔离指标 P_GN"),
)


def plot_sweep(frame: pd.DataFrame, parameter: str, path: str, title: Optional[str] = None) -> str:
    """把 SweepResult.to_frame() 画成 2×2 的 PNG。"""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for ax, (column, label) in zip(axes.flat, SWEEP_PANELS):
        ax.plot(frame[parameter], frame[column], marker="o", markersize=3)
        ax.set_xlabel(parameter)
        ax.set_title(label)
        ax.grid(alpha=0.3)
    fig.suptitle(title or f"比较静态: {parameter}")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    logger.info("已保存图像 %s", path)
    return path


def plot_event_study(table: pd.DataFrame, path: str, level: float = 0.95) -> str:
    """table 需要 name、estimate、se 三列，按事件时间顺序排列。"""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from scipy import stats

    crit = stats.norm.ppf(0.5 + level / 2.0)
    x = range(len(table))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(x, table["estimate"], yerr=crit * table["se"], fmt="o", capsize=3)
    ax.axhline(0.0, color="gray", linewidth=1)
    ax.set_xticks(list(x))
    ax.set_xticklabels(table["name"], rotation=30)
    ax.set_title("事件研究系数")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    logger.info("已保存图像 %s", path)
    return path
