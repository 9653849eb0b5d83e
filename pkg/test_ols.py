"""OLS 与聚类稳健协方差"""
import numpy as np
import pytest

from econometrics.ols import cluster_vcov, ols
from utils.errors import SingularDesignError


def brute_force_vcov(X, e, clusters, adjustment):
    """逐聚类累加外积的朴素实现。"""
    n, k = X.shape
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((k, k))
    labels = sorted(set(clusters))
    for label in labels:
        rows = [i for i in range(n) if clusters[i] == label]
        score = sum(X[i] * e[i] for i in rows)
        meat += np.outer(score, score)
    vcov = bread @ meat @ bread
    if adjustment == "CR1":
        c = len(labels)
        vcov *= c / (c - 1) * (n - 1) / (n - k)
    return vcov


# ============================================================
# 系数
# ============================================================


def test_constant_outcome():
    X = np.column_stack([np.ones(6), np.arange(6.0)])
    fit = ols(X, np.full(6, 3.0))
    np.testing.assert_allclose(fit.coef, [3.0, 0.0], atol=1e-12)
    assert fit.rss == pytest.approx(0.0, abs=1e-20)


def test_exact_line():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    fit = ols(x[:, None], 2.0 * x)
    assert fit.coef[0] == pytest.approx(2.0, rel=1e-14)


def test_matches_normal_equations(rng):
    X = rng.standard_normal((50, 5))
    y = X @ np.array([1.0, -2.0, 0.5, 0.0, 3.0]) + rng.standard_normal(50)
    fit = ols(X, y)
    expected = np.linalg.solve(X.T @ X, X.T @ y)
    np.testing.assert_allclose(fit.coef, expected, atol=1e-10)
    assert fit.orthogonality < 1e-10
    assert fit.dropped.size == 0


def test_collinear_column_keeps_first(rng):
    x = rng.standard_normal(30)
    X = np.column_stack([np.ones(30), x, 2.0 * x])
    y = 1.0 + x + 0.1 * rng.standard_normal(30)
    fit = ols(X, y)
    assert fit.kept.tolist() == [0, 1]
    assert fit.dropped.tolist() == [2]


def test_zero_design_rejected():
    with pytest.raises(SingularDesignError):
        ols(np.zeros((5, 2)), np.arange(5.0))


def test_weights_match_row_duplication(rng):
    X = np.column_stack([np.ones(8), rng.standard_normal(8)])
    y = rng.standard_normal(8)
    weights = np.array([1, 2, 1, 3, 1, 1, 2, 1], dtype=float)
    duplicated = np.repeat(np.arange(8), weights.astype(int))
    np.testing.assert_allclose(ols(X, y, weights).coef, ols(X[duplicated], y[duplicated]).coef, atol=1e-12)


# ============================================================
# 协方差
# ============================================================


def test_one_observation_per_cluster_is_hc0(rng):
    X = np.column_stack([np.ones(20), rng.standard_normal(20)])
    e = rng.standard_normal(20)
    hc0 = np.linalg.inv(X.T @ X) @ (X.T * e ** 2) @ X @ np.linalg.inv(X.T @ X)
    np.testing.assert_allclose(cluster_vcov(X, e, np.arange(20), "CR0"), hc0, atol=1e-12)


def test_zero_residuals_give_zero_vcov(rng):
    X = np.column_stack([np.ones(10), rng.standard_normal(10)])
    np.testing.assert_array_equal(cluster_vcov(X, np.zeros(10), np.repeat([1, 2], 5)), np.zeros((2, 2)))


@pytest.mark.parametrize("adjustment", ["CR0", "CR1"])
def test_matches_brute_force(rng, adjustment):
    X = np.column_stack([np.ones(10), rng.standard_normal((10, 4))])
    e = rng.standard_normal(10)
    clusters = ["a", "b", "a", "c", "b", "c", "a", "b", "c", "a"]
    np.testing.assert_allclose(
        cluster_vcov(X, e, np.array(clusters), adjustment),
        brute_force_vcov(X, e, clusters, adjustment),
        rtol=1e-10, atol=1e-14,
    )


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force_on_random_panels(seed):
    rng = np.random.default_rng(seed)
    n_clusters = int(rng.integers(3, 11))
    periods = int(rng.integers(3, 9))
    k = int(rng.integers(2, 6))
    clusters = np.repeat(np.arange(n_clusters), periods).tolist()
    n = len(clusters)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, k - 1))])
    e = rng.standard_normal(n) * rng.uniform(0.5, 2.0, n)
    for adjustment in ("CR0", "CR1"):
        np.testing.assert_allclose(
            cluster_vcov(X, e, np.array(clusters), adjustment),
            brute_force_vcov(X, e, clusters, adjustment),
            rtol=1e-10, atol=1e-14,
        )


def test_symmetric_psd_and_cr1_inflates(rng):
    X = np.column_stack([np.ones(40), rng.standard_normal((40, 3))])
    e = rng.standard_normal(40)
    clusters = np.repeat(np.arange(8), 5)
    cr0 = cluster_vcov(X, e, clusters, "CR0")
    cr1 = cluster_vcov(X, e, clusters, "CR1")
    np.testing.assert_array_equal(cr1, cr1.T)
    assert np.linalg.eigvalsh(cr1).min() >= -1e-12
    assert np.all(np.diag(cr1) >= np.diag(cr0))


def test_invalid_inputs(rng):
    X = np.column_stack([np.ones(6), rng.standard_normal(6)])
    e = rng.standard_normal(6)
    with pytest.raises(ValueError):
        cluster_vcov(X, e, np.ones(6), "CR1")
    with pytest.raises(ValueError):
        cluster_vcov(X, e, np.arange(6), "HC3")
    with pytest.raises(SingularDesignError):
        cluster_vcov(np.column_stack([np.ones(6), np.ones(6)]), e, np.arange(6))
