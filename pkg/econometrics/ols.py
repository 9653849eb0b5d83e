"""
最小二乘与州聚类稳健协方差

- QR 分解求解，共线列按列顺序检测并剔除（保留先出现的列）
- 三明治估计量：bread = (X'WX)^-1，meat = Σ_c s_c s_c'
- 小样本修正 CR1 = C/(C-1) · (N-1)/(N-K)
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import linalg

from config import settings
from utils.errors import SingularDesignError

logger = logging.getLogger(__name__)


@dataclass
class OLSFit:
    """OLS 拟合结果；coef 只对应保留的列。"""

    coef: np.ndarray
    kept: np.ndarray
    dropped: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    rss: float
    r_squared: float
    orthogonality: float


def _weighted(X: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    if weights is None:
        return X, y
    root = np.sqrt(weights)
    return X * root[:, None], y * root


def ols(
    X: np.ndarray,
    y: np.ndarray,
    weights: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> OLSFit:
    """（加权）最小二乘。

    Args:
        X: n×k 设计矩阵
        y: 被解释变量
        weights: 观测权重，None 表示等权
        tol: 共线判定阈值（相对列范数），默认 settings.COLLINEARITY_TOLERANCE

    Raises:
        SingularDesignError: 没有可保留的列，或行数少于保留列数

    Returns:
        OLSFit
    """
    tol = settings.COLLINEARITY_TOLERANCE if tol is None else tol
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    Xw, yw = _weighted(X, y, weights)

    # [X y] 一次 QR，R 的最后一列上半部分即 Q'y
    R_aug = np.linalg.qr(np.column_stack([Xw, yw]), mode="r")
    R = R_aug[:k, :k]
    qty = R_aug[:k, k]
    if R.shape[0] < k:
        R = np.vstack([R, np.zeros((k - R.shape[0], k))])
        qty = np.concatenate([qty, np.zeros(k - qty.shape[0])])
    norms = np.linalg.norm(R, axis=0)

    keep = list(range(k))
    while True:
        if not keep:
            raise SingularDesignError("设计矩阵的所有列都共线或为零")
        Q2, R2 = np.linalg.qr(R[:, keep])
        diag = np.abs(np.diag(R2))
        offending = None
        for position, column in enumerate(keep):
            if norms[column] == 0.0 or (position < diag.size and diag[position] <= tol * norms[column]):
                offending = column
                break
        if offending is None:
            break
        keep.remove(offending)

    if len(keep) > n:
        raise SingularDesignError(f"观测数 {n} 少于保留的列数 {len(keep)}")
    coef = linalg.solve_triangular(R2, Q2.T @ qty)
    kept = np.array(keep, dtype=int)
    dropped = np.array([j for j in range(k) if j not in set(keep)], dtype=int)
    if dropped.size:
        logger.warning("共线剔除 %d 列: %s", dropped.size, dropped.tolist())

    fitted = X[:, kept] @ coef
    residuals = y - fitted
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    rss = float(np.sum(w * residuals ** 2))
    centered = y - np.sum(w * y) / np.sum(w)
    tss = float(np.sum(w * centered ** 2))
    r_squared = 1.0 - rss / tss if tss > 0 else float("nan")

    ew = residuals * np.sqrt(w)
    Xk = Xw[:, kept]
    scale = np.linalg.norm(Xk, axis=0) * (np.linalg.norm(yw) + 1e-300)
    orthogonality = float(np.max(np.abs(Xk.T @ ew) / scale))
    return OLSFit(
        coef=coef,
        kept=kept,
        dropped=dropped,
        residuals=residuals,
        fitted=fitted,
        rss=rss,
        r_squared=r_squared,
        orthogonality=orthogonality,
    )


def cluster_vcov(
    X: np.ndarray,
    residuals: np.ndarray,
    clusters: np.ndarray,
    adjustment: str = settings.DEFAULT_CLUSTER_ADJUSTMENT,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """聚类稳健协方差矩阵。

    Args:
        X: 只含保留列的设计矩阵
        residuals: 未加权残差
        clusters: 每个观测的聚类标签
        adjustment: "CR0" 或 "CR1"
        weights: 观测权重

    Raises:
        SingularDesignError: X'WX 不可逆
        ValueError: 聚类数 < 2 或 adjustment 非法

    Returns:
        K×K 对称协方差矩阵
    """
    if adjustment not in ("CR0", "CR1"):
        raise ValueError(f"adjustment 只能是 CR0 或 CR1，收到 {adjustment}")
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    Xw, ew = _weighted(X, np.asarray(residuals, dtype=float), weights)

    codes, uniques = pd.factorize(pd.Series(clusters), sort=True)
    n_clusters = len(uniques)
    if n_clusters < 2:
        raise ValueError(f"聚类数为 {n_clusters}，至少需要 2 个")
    if n <= k:
        raise SingularDesignError(f"观测数 {n} 不多于列数 {k}，无法估计协方差")

    try:
        factor = linalg.cho_factor(Xw.T @ Xw)
    except linalg.LinAlgError as exc:
        raise SingularDesignError(f"X'WX 不可逆: {exc}") from exc
    bread = linalg.cho_solve(factor, np.eye(k))

    scores = pd.DataFrame(Xw * ew[:, None]).groupby(codes, sort=True).sum().to_numpy()
    meat = scores.T @ scores
    vcov = bread @ meat @ bread
    if adjustment == "CR1":
        vcov *= n_clusters / (n_clusters - 1) * (n - 1) / (n - k)
    return (vcov + vcov.T) / 2.0
