"""Dense least squares with the noise-variance estimate used by all estimators."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, RankDeficient

RANK_RTOL = 1e-10
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class RegressionFit:
    weights: np.ndarray
    sigma2: float
    residual_ss: float


def as_design(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionMismatch(f"design matrix must be 2-d and non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DimensionMismatch("design matrix has non-finite entries")
    return X


def as_labels(y, n=None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise DimensionMismatch(f"labels must be 1-d, got shape {y.shape}")
    if n is not None and y.shape[0] != n:
        raise DimensionMismatch(f"labels have length {y.shape[0]}, design has {n} rows")
    if not np.all(np.isfinite(y)):
        raise DimensionMismatch("labels have non-finite entries")
    return y


def residual_ss(X, w, y) -> float:
    """Sum of squared residuals ``||Xw - y||^2``."""
    X = as_design(X)
    w = np.asarray(w, dtype=float).reshape(-1)
    y = as_labels(y, X.shape[0])
    if w.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"weights have length {w.shape[0]}, design has {X.shape[1]} columns")
    r = X @ w - y
    return float(r @ r)


class LeastSquares:
    """Pivoted-QR factorization of a fixed design, reused for many label vectors.

    The estimators permute labels rather than rows, so a single factorization
    serves every M-step: ``OLS(PX, y) == OLS(X, P^T y)``.
    """

    def __init__(self, X):
        X = as_design(X)
        n, d = X.shape
        if n <= d:
            raise DimensionMismatch(f"need n > d for the 1/(n-d) variance estimate, got n={n}, d={d}")
        Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        if diag[0] == 0.0 or diag[-1] <= RANK_RTOL * diag[0]:
            raise RankDeficient(
                f"design is rank deficient (|R_dd|/|R_11| = {diag[-1] / diag[0] if diag[0] else 0.0:.3g})"
            )
        self.X = X
        self.n, self.d = n, d
        self._Q = Q
        self._R = R
        self._piv = piv

    def weights(self, y) -> np.ndarray:
        z = scipy.linalg.solve_triangular(self._R, self._Q.T @ y)
        w = np.empty(self.d)
        w[self._piv] = z
        return w

    def fit(self, y) -> RegressionFit:
        y = as_labels(y, self.n)
        w = self.weights(y)
        r = self.X @ w - y
        rss = float(r @ r)
        return RegressionFit(weights=w, sigma2=rss / (self.n - self.d), residual_ss=rss)


def ols_fit(X, y) -> RegressionFit:
    """Ordinary least squares returning weights, ``||Xw-y||^2/(n-d)`` and the RSS."""
    X = as_design(X)
    y = as_labels(y, X.shape[0])
    return LeastSquares(X).fit(y)


def sampler_sigma2(sigma2: float) -> float:
    return max(float(sigma2), SIGMA2_FLOOR)
