import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from shuffled_regression import DimensionMismatch, RankDeficient, ols_fit, residual_ss
from shuffled_regression.linalg import LeastSquares, sampler_sigma2

from oracles import naive_rss


def test_exact_fit():
    fit = ols_fit([[1.0], [2.0], [3.0]], [2.0, 4.0, 6.0])
    assert fit.weights == pytest.approx([2.0], abs=1e-14)
    assert fit.sigma2 == pytest.approx(0.0, abs=1e-28)


def test_collinear_columns_rank_deficient():
    with pytest.raises(RankDeficient):
        ols_fit([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]], [1.0, 0.0, 2.0])


@pytest.mark.parametrize("shape", [(2, 2), (2, 3)])
def test_n_not_above_d(shape):
    with pytest.raises(DimensionMismatch):
        ols_fit(np.ones(shape), np.ones(shape[0]))


def test_length_mismatch():
    with pytest.raises(DimensionMismatch):
        ols_fit(np.eye(3)[:, :1], [1.0, 2.0])


def test_noiseless_recovery():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((10, 3))
    w0 = np.array([1.0, -2.0, 0.5])
    y = X @ w0
    fit = ols_fit(X, y)
    np.testing.assert_allclose(fit.weights, w0, atol=1e-9)
    assert fit.sigma2 <= 1e-18
    # substitution oracle
    assert naive_rss(X, fit.weights, y) <= naive_rss(X, w0, y) + 1e-18


def test_sigma2_normalization():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((12, 4))
    y = rng.standard_normal(12)
    fit = ols_fit(X, y)
    assert fit.sigma2 == pytest.approx(naive_rss(X, fit.weights, y) / 8, rel=1e-12)
    assert fit.residual_ss == pytest.approx(naive_rss(X, fit.weights, y), rel=1e-12)


def test_residual_ss_examples():
    assert residual_ss([[1.0], [1.0]], [0.0], [0.0, 0.0]) == 0.0
    assert residual_ss([[1.0], [2.0]], [1.0], [0.0, 0.0]) == 5.0
    rng = np.random.default_rng(11)
    X = rng.standard_normal((6, 2))
    w = rng.standard_normal(2)
    y = rng.standard_normal(6)
    assert residual_ss(X, w, y) == pytest.approx(naive_rss(X.tolist(), w.tolist(), y.tolist()), rel=1e-13)
    with pytest.raises(DimensionMismatch):
        residual_ss(X, np.ones(3), y)


def test_sampler_floor():
    assert sampler_sigma2(0.0) == 1e-12
    assert sampler_sigma2(2.0) == 2.0


@st.composite
def regression_problems(draw):
    n = draw(st.integers(4, 25))
    d = draw(st.integers(1, min(5, n - 1)))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d)), rng.standard_normal(n) * draw(st.floats(0.1, 10.0)), seed


@settings(max_examples=60, deadline=None)
@given(regression_problems())
def test_gradient_vanishes(problem):
    X, y, _ = problem
    w = ols_fit(X, y).weights
    grad = 2 * X.T @ (X @ w - y)
    assert np.max(np.abs(grad)) <= 1e-8 * max(1.0, np.max(np.abs(X.T @ y)))


@settings(max_examples=60, deadline=None)
@given(regression_problems())
def test_permutation_equivariance(problem):
    X, y, seed = problem
    p = np.random.default_rng(seed + 1).permutation(len(y))
    np.testing.assert_allclose(ols_fit(X[p], y[p]).weights, ols_fit(X, y).weights, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(regression_problems())
def test_sigma2_zero_iff_in_column_space(problem):
    X, y, seed = problem
    assert ols_fit(X, y).sigma2 >= 0
    w = np.random.default_rng(seed).standard_normal(X.shape[1])
    assert ols_fit(X, X @ w).sigma2 <= 1e-20 * max(1.0, float((X @ w) @ (X @ w)))


@given(arrays(float, st.integers(4, 12), elements=st.floats(-1e3, 1e3)))
def test_factorization_reuse_matches_direct(y):
    rng = np.random.default_rng(len(y))
    X = rng.standard_normal((len(y), 2))
    ls = LeastSquares(X)
    direct = np.linalg.lstsq(X, y, rcond=None)[0]
    np.testing.assert_allclose(ls.fit(y).weights, direct, atol=1e-9 * max(1.0, np.abs(y).max()))
