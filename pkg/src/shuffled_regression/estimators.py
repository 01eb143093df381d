"""OLS baseline, Hard EM and Stochastic EM, with within-group variants.

The ungrouped estimators are the grouped ones run on a single group, so the
two always agree for ``G = 1``.
"""
from dataclasses import dataclass, field, replace
import math
from typing import List, Optional

import numpy as np

from .errors import ConfigError, DimensionMismatch, InvalidBounds
from .linalg import LeastSquares, as_design, as_labels, sampler_sigma2
from .permutations import ChainState, SoftPermutation, apply_soft_transpose, identity, n_collected, run_chain

HARD_EM_STREAM = 1
STOCHASTIC_EM_STREAM = 2
RESTART_TIE_TOL = 1e-12


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """PCG64 stream derived from ``seed`` and an integer key path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=tuple(key))))


@dataclass(frozen=True)
class EMConfig:
    """Iteration and sampling settings.

    ``None`` fields take the size-dependent defaults from :meth:`resolve`:
    ``s = ceil(n ln n)``, ``s' = n``, ``g = max(1, n // 10)``, ``R = n``.
    By default Stochastic EM overwrites the working labels with ``E[P^T] y``
    each iteration; under heavy shuffling this shrinks the weights towards
    zero. ``non_cumulative=True`` instead reweights the observed labels every
    iteration.
    """

    iterations: int = 50
    sampling_steps: Optional[int] = None
    burn_steps: Optional[int] = None
    sample_gap: Optional[int] = None
    restarts: Optional[int] = None
    seed: int = 0
    non_cumulative: bool = False
    ols_init_restart: bool = False

    def resolve(self, n: int, sampler: bool = True) -> "EMConfig":
        cfg = replace(
            self,
            sampling_steps=self.sampling_steps if self.sampling_steps is not None else math.ceil(n * math.log(n)),
            burn_steps=self.burn_steps if self.burn_steps is not None else n,
            sample_gap=self.sample_gap if self.sample_gap is not None else max(1, n // 10),
            restarts=self.restarts if self.restarts is not None else n,
        )
        cfg.validate(sampler)
        return cfg

    def validate(self, sampler: bool = True):
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.restarts is not None and self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.sample_gap is not None and self.sample_gap < 1:
            raise ConfigError(f"sample_gap must be >= 1, got {self.sample_gap}")
        if self.burn_steps is not None and self.burn_steps < 0:
            raise ConfigError(f"burn_steps must be >= 0, got {self.burn_steps}")
        s, b, g = self.sampling_steps, self.burn_steps, self.sample_gap
        if sampler and s is not None and b is not None:
            if s <= b:
                raise ConfigError(f"sampling_steps ({s}) must exceed burn_steps ({b})")
            if g is not None and n_collected(s, b, g) == 0:
                raise ConfigError(f"schedule s={s}, s'={b}, g={g} collects no samples")


@dataclass(frozen=True)
class TraceEntry:
    weights: np.ndarray
    residual_ss: float
    acceptance_rate: float


@dataclass
class FitResult:
    """``permutation_estimate`` is an index array (OLS, Hard EM) or the last
    :class:`SoftPermutation` accumulator (Stochastic EM)."""

    method: str
    weights: np.ndarray
    sigma2: float
    permutation_estimate: object
    trace: List[TraceEntry] = field(default_factory=list)
    restart: Optional[int] = None

    @property
    def residual_ss(self) -> float:
        return self.trace[-1].residual_ss if self.trace else float("nan")


@dataclass
class GroupedDataset:
    """Rows ``group_bounds[g]:group_bounds[g+1]`` form group ``g``.

    ``row_ids`` optionally maps rows back to the order they were read in.
    """

    X: np.ndarray
    y: np.ndarray
    group_bounds: np.ndarray
    row_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.X = as_design(self.X)
        self.y = as_labels(self.y, self.X.shape[0])
        self.group_bounds = check_bounds(self.group_bounds, self.X.shape[0])

    @classmethod
    def single(cls, X, y) -> "GroupedDataset":
        X = as_design(X)
        return cls(X, y, np.array([0, X.shape[0]]))

    @property
    def n_groups(self) -> int:
        return len(self.group_bounds) - 1

    def group_of_rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_groups), np.diff(self.group_bounds))


def check_bounds(bounds, n) -> np.ndarray:
    b = np.asarray(bounds, dtype=np.int64).reshape(-1)
    if b.shape[0] < 2 or b[0] != 0 or b[-1] != n or np.any(np.diff(b) <= 0):
        raise InvalidBounds(f"group bounds must rise strictly from 0 to {n}, got {b.tolist()}")
    return b


def fit_ols_baseline(X, y) -> FitResult:
    X = as_design(X)
    y = as_labels(y, X.shape[0])
    fit = LeastSquares(X).fit(y)
    entry = TraceEntry(fit.weights, fit.residual_ss, 0.0)
    return FitResult("ols", fit.weights, fit.sigma2, identity(X.shape[0]), [entry])


def _within_group_order(values, bounds) -> np.ndarray:
    """Indices sorting ``values`` ascending inside each group (stable)."""
    order = np.empty(values.shape[0], dtype=np.int64)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        order[lo:hi] = lo + np.argsort(values[lo:hi], kind="stable")
    return order


def _within_group_shuffle(rng, bounds, n) -> np.ndarray:
    p = np.empty(n, dtype=np.int64)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        p[lo:hi] = lo + rng.permutation(hi - lo)
    return p


def _hard_em_restart(ls, y_sorted, bounds, w, iterations):
    """One coordinate-descent run; returns ``(trace, assignment, sigma2)``.

    ``assignment[i]`` is the row of X matched to the i-th sorted label, so
    ``X[assignment]`` is the permuted design the row-permuting form works on.
    """
    trace = []
    prev = None
    fit = None
    for it in range(iterations):
        assignment = _within_group_order(ls.X @ w, bounds)
        if prev is not None and np.array_equal(assignment, prev):
            # fixed point: every later iteration reproduces this one exactly
            trace.extend([trace[-1]] * (iterations - it))
            break
        y_work = np.empty_like(y_sorted)
        y_work[assignment] = y_sorted
        fit = ls.fit(y_work)
        w = fit.weights
        trace.append(TraceEntry(w, fit.residual_ss, 0.0))
        prev = assignment
    return trace, prev, fit.sigma2


def hard_em_restarts(data: GroupedDataset, cfg: EMConfig = EMConfig()):
    """Yield ``(restart, trace, permutation, sigma2)`` for each Hard EM restart.

    Restart ``r`` initializes the weights by OLS against a random within-group
    permutation of the labels drawn from stream ``(seed, r)``; restart 0 uses
    the labels as given when ``cfg.ols_init_restart``. It then alternates the
    sort-based assignment with an OLS refit for ``cfg.iterations`` steps.
    ``permutation[i]`` is the row of X matched to observed label ``i``.
    """
    X, y, bounds = data.X, data.y, data.group_bounds
    n = X.shape[0]
    cfg = cfg.resolve(n, sampler=False)
    ls = LeastSquares(X)
    label_order = _within_group_order(y, bounds)
    y_sorted = y[label_order]
    for r in range(cfg.restarts):
        if r == 0 and cfg.ols_init_restart:
            y_init = y
        else:
            y_init = y[_within_group_shuffle(rng_stream(cfg.seed, HARD_EM_STREAM, r), bounds, n)]
        trace, assignment, sigma2 = _hard_em_restart(ls, y_sorted, bounds, ls.weights(y_init), cfg.iterations)
        p = np.empty(n, dtype=np.int64)
        p[label_order] = assignment
        yield r, trace, p, sigma2


def better_restart(candidate_rss: float, best_rss: Optional[float]) -> bool:
    """Strictly lower residual wins; near-ties keep the earlier restart."""
    return best_rss is None or candidate_rss < best_rss - RESTART_TIE_TOL


def fit_hard_em_grouped(data: GroupedDataset, cfg: EMConfig = EMConfig()) -> FitResult:
    """Hard EM with labels permuted only inside their group; the restart with
    the smallest final residual wins."""
    best = None
    for r, trace, p, sigma2 in hard_em_restarts(data, cfg):
        if better_restart(trace[-1].residual_ss, best and best[1][-1].residual_ss):
            best = (r, trace, p, sigma2)
    r, trace, p, sigma2 = best
    return FitResult("hard-em", trace[-1].weights, sigma2, p, trace, restart=r)


def fit_hard_em(X, y, cfg: EMConfig = EMConfig()) -> FitResult:
    return fit_hard_em_grouped(GroupedDataset.single(X, y), cfg)


def fit_stochastic_em_grouped(data: GroupedDataset, cfg: EMConfig = EMConfig()) -> FitResult:
    """Stochastic EM with a Metropolis-Hastings chain over within-group swaps.

    One chain, started at the identity, persists across all iterations. Each
    iteration samples ``s`` proposals, averages the kept permutations into a
    :class:`SoftPermutation`, replaces the working labels by ``E[P^T] y`` and
    refits OLS. By default the working labels are overwritten each iteration
    and the chain targets the latest ones; with ``cfg.non_cumulative`` the
    average is applied to the observed labels and the chain always targets them.
    """
    X, y, bounds = data.X, data.y, data.group_bounds
    n = X.shape[0]
    cfg = cfg.resolve(n)
    ls = LeastSquares(X)
    fit = ls.fit(y)
    w, sigma2 = fit.weights, fit.sigma2
    y_work = y
    state = ChainState(identity(n))
    rng = rng_stream(cfg.seed, STOCHASTIC_EM_STREAM)
    trace = []
    soft = None
    for _ in range(cfg.iterations):
        scores = X @ w
        target = y if cfg.non_cumulative else y_work
        state.refresh(scores, target, sampler_sigma2(sigma2))
        soft, accepted = run_chain(
            state, scores, target, cfg.sampling_steps, rng,
            burn=cfg.burn_steps, gap=cfg.sample_gap, bounds=bounds,
        )
        y_work = apply_soft_transpose(soft, target)
        fit = ls.fit(y_work)
        w, sigma2 = fit.weights, fit.sigma2
        trace.append(TraceEntry(w, fit.residual_ss, accepted / cfg.sampling_steps))
    return FitResult("stochastic-em", w, sigma2, soft, trace)


def fit_stochastic_em(X, y, cfg: EMConfig = EMConfig()) -> FitResult:
    return fit_stochastic_em_grouped(GroupedDataset.single(X, y), cfg)


def parameter_error(w, w_true) -> float:
    w = np.asarray(w, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    if w.shape != w_true.shape:
        raise DimensionMismatch(f"weights {w.shape} vs truth {w_true.shape}")
    return float(np.linalg.norm(w - w_true))


METHODS = {
    "ols": lambda data, cfg: fit_ols_baseline(data.X, data.y),
    "hard-em": fit_hard_em_grouped,
    "stochastic-em": fit_stochastic_em_grouped,
}
