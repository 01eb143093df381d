"""Permutations as index arrays, the sort-based assignment, and the swap chain.

Convention: a permutation ``p`` acts on a vector by ``(p . v)[i] = v[p[i]]``,
i.e. ``p[i]`` is the source row placed at position ``i``. Its matrix ``P`` has
``P[i, p[i]] = 1``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyAccumulator, IndexOutOfRange


def identity(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def is_permutation(p) -> bool:
    p = np.asarray(p)
    return p.ndim == 1 and np.array_equal(np.sort(p), np.arange(p.shape[0]))


def inverse(p) -> np.ndarray:
    p = np.asarray(p)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.shape[0], dtype=p.dtype)
    return inv


def apply_permutation(p, v) -> np.ndarray:
    p = np.asarray(p)
    v = np.asarray(v)
    if v.shape[0] != p.shape[0]:
        raise DimensionMismatch(f"permutation of size {p.shape[0]} applied to length {v.shape[0]}")
    return v[p]


# rows of a matrix permute exactly like entries of a vector
apply_permutation_rows = apply_permutation


def permutation_matrix(p) -> np.ndarray:
    n = len(p)
    P = np.zeros((n, n))
    P[np.arange(n), p] = 1.0
    return P


def best_permutation(scores, y) -> np.ndarray:
    """Permutation ``p`` minimizing ``||scores[p] - y||^2``.

    Matches the rank order of ``scores`` to the rank order of ``y``; ties go to
    the lower original index.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=float)
    if scores.shape != y.shape or scores.ndim != 1:
        raise DimensionMismatch(f"scores {scores.shape} and labels {y.shape} must be equal-length vectors")
    p = np.empty(y.shape[0], dtype=np.int64)
    p[np.argsort(y, kind="stable")] = np.argsort(scores, kind="stable")
    return p


@dataclass
class SoftPermutation:
    """Running sum of permutation matrices; divide by ``sample_count`` to average."""

    n: int
    weights: np.ndarray = None
    sample_count: int = 0

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.zeros((self.n, self.n))

    def normalized(self) -> np.ndarray:
        if self.sample_count == 0:
            raise EmptyAccumulator("no permutations accumulated")
        return self.weights / self.sample_count


def accumulate(soft: SoftPermutation, p) -> SoftPermutation:
    p = np.asarray(p)
    if p.shape[0] != soft.n:
        raise DimensionMismatch(f"permutation of size {p.shape[0]} added to accumulator of size {soft.n}")
    soft.weights[np.arange(soft.n), p] += 1.0
    soft.sample_count += 1
    return soft


def apply_soft_transpose(soft: SoftPermutation, y) -> np.ndarray:
    """Average of ``P^T y`` over the accumulated permutations."""
    y = np.asarray(y, dtype=float)
    if y.shape[0] != soft.n:
        raise DimensionMismatch(f"labels of length {y.shape[0]} for accumulator of size {soft.n}")
    # normalize before the product so an all-identity average returns y bit-exactly
    return soft.normalized().T @ y


@dataclass
class ChainState:
    """Current permutation of the swap chain and its per-position residuals.

    ``cached_residuals[i] = scores[current[i]] - y[i]``.
    """

    current: np.ndarray
    cached_residuals: np.ndarray = field(default=None)
    sigma2: float = 1.0

    def refresh(self, scores, y, sigma2) -> "ChainState":
        self.cached_residuals = np.asarray(scores)[self.current] - np.asarray(y)
        self.sigma2 = float(sigma2)
        return self


def log_gaussian_kernel(p, scores, y, sigma2) -> float:
    """Unnormalized log-likelihood ``-sum_i (scores[p[i]] - y[i])^2 / sigma2``."""
    r = np.asarray(scores)[np.asarray(p)] - np.asarray(y)
    return -float(r @ r) / sigma2


def log_ratio_swap(state: ChainState, i: int, j: int, scores, y) -> float:
    """Log of q(swapped)/q(current) for exchanging positions ``i`` and ``j``."""
    n = state.current.shape[0]
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise IndexOutOfRange(f"swap ({i}, {j}) invalid for n={n}")
    p = state.current
    ri = state.cached_residuals[i]
    rj = state.cached_residuals[j]
    ri_new = scores[p[j]] - y[i]
    rj_new = scores[p[i]] - y[j]
    return float((ri * ri + rj * rj - ri_new * ri_new - rj_new * rj_new) / state.sigma2)


def run_chain(state: ChainState, scores, y, steps, rng, *, burn=0, gap=1, bounds=None, soft=None, visits=None):
    """Advance the Metropolis-Hastings swap chain by ``steps`` proposals.

    Each proposal picks a group uniformly (when ``bounds`` gives more than one
    group), then two distinct positions inside it, and is accepted with
    probability ``min(1, exp(log_ratio))``. After step ``j`` (1-based) the
    current permutation is added to ``soft`` when ``j > burn`` and
    ``j % gap == 0``. ``state`` must already be refreshed against
    ``scores``/``y``/``sigma2``; it is updated in place. If ``visits`` (a
    ``collections.Counter``) is given, it also counts collected states as tuples.

    Returns ``(soft, accepted)``.
    """
    n = state.current.shape[0]
    if bounds is None:
        bounds = (0, n)
    bounds = [int(b) for b in bounds]
    n_groups = len(bounds) - 1
    if soft is None:
        soft = SoftPermutation(n)

    if n_groups > 1:
        group = rng.integers(n_groups, size=steps).tolist()
    else:
        group = None
    u1 = rng.random(steps).tolist()
    u2 = rng.random(steps).tolist()
    with np.errstate(divide="ignore"):
        log_u = np.log(rng.random(steps)).tolist()

    p = state.current.tolist()
    r = state.cached_residuals.tolist()
    s = np.asarray(scores, dtype=float).tolist()
    yy = np.asarray(y, dtype=float).tolist()
    inv_sigma2 = 1.0 / state.sigma2
    lo, size = bounds[0], bounds[1] - bounds[0]
    collected = []
    accepted = 0

    for step in range(steps):
        if group is not None:
            g = group[step]
            lo = bounds[g]
            size = bounds[g + 1] - lo
        if size >= 2:
            i = lo + int(u1[step] * size)
            j = lo + int(u2[step] * (size - 1))
            if j >= i:
                j += 1
            ri = r[i]
            rj = r[j]
            ri_new = s[p[j]] - yy[i]
            rj_new = s[p[i]] - yy[j]
            log_alpha = (ri * ri + rj * rj - ri_new * ri_new - rj_new * rj_new) * inv_sigma2
            if log_alpha >= 0.0 or log_u[step] < log_alpha:
                p[i], p[j] = p[j], p[i]
                r[i] = ri_new
                r[j] = rj_new
                accepted += 1
        j_step = step + 1
        if j_step > burn and j_step % gap == 0:
            collected.append(list(p))

    state.current = np.asarray(p, dtype=np.int64)
    state.cached_residuals = np.asarray(r)
    if collected:
        cols = np.asarray(collected, dtype=np.int64)
        for i in range(n):
            soft.weights[i] += np.bincount(cols[:, i], minlength=n)
        soft.sample_count += len(collected)
        if visits is not None:
            visits.update(map(tuple, collected))
    return soft, accepted


def n_collected(steps: int, burn: int, gap: int) -> int:
    """Number of samples ``run_chain`` keeps for the given schedule."""
    return max(0, steps // gap - burn // gap)

