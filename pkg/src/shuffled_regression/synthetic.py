"""Synthetic shuffled-regression datasets and label shuffling processes."""
from dataclasses import dataclass
import math
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError, InvalidBounds
from .estimators import check_bounds, rng_stream
from .permutations import identity

SHUFFLE_MODES = ("full", "identity", "grouped")


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.d >= 1 and self.n > self.d):
            raise ConfigError(f"need n > d >= 1, got n={self.n}, d={self.d}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ConfigError(f"sigma must be a finite value >= 0, got {self.sigma}")


@dataclass
class SyntheticInstance:
    """``y_observed = (y_clean + noise)[pi_true]``."""

    X: np.ndarray
    y_clean: np.ndarray
    noise: np.ndarray
    y_observed: np.ndarray
    w_true: np.ndarray
    pi_true: np.ndarray
    group_bounds: Optional[np.ndarray] = None

    @property
    def y_unshuffled(self) -> np.ndarray:
        return self.y_clean + self.noise


def generate(spec: SyntheticSpec, shuffle: str = "full", group_bounds=None, crossbin_fraction: float = 0.0):
    """Draw ``X``, ``w0`` with iid N(0, 1) entries and N(0, sigma^2) noise, then shuffle.

    ``shuffle`` is ``"full"`` (uniform permutation), ``"identity"`` or
    ``"grouped"`` (within ``group_bounds``, see :func:`grouped_shuffle`).
    """
    if shuffle not in SHUFFLE_MODES:
        raise ConfigError(f"unknown shuffle mode {shuffle!r}; expected one of {SHUFFLE_MODES}")
    rng = rng_stream(spec.seed)
    X = rng.standard_normal((spec.n, spec.d))
    w = rng.standard_normal(spec.d)
    noise = spec.sigma * rng.standard_normal(spec.n)
    y_clean = X @ w
    y_full = y_clean + noise
    if shuffle == "full":
        pi = rng.permutation(spec.n)
    elif shuffle == "identity":
        pi = identity(spec.n)
    else:
        if group_bounds is None:
            raise InvalidBounds("grouped shuffle needs group_bounds")
        _, pi, _ = grouped_shuffle(y_full, group_bounds, crossbin_fraction, int(rng.integers(2**63)))
        group_bounds = check_bounds(group_bounds, spec.n)
    pi = np.asarray(pi, dtype=np.int64)
    return SyntheticInstance(X, y_clean, noise, y_full[pi], w, pi, group_bounds)


def progressive_shuffle(y, swaps: int, seed: int) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    """Apply ``swaps`` uniformly random transpositions of distinct positions in turn."""
    if swaps < 0:
        raise ConfigError(f"swaps must be >= 0, got {swaps}")
    y = np.array(y, dtype=float)
    n = y.shape[0]
    if swaps and n < 2:
        raise ConfigError("cannot swap entries of a vector shorter than 2")
    rng = rng_stream(seed)
    log = []
    for _ in range(swaps):
        i, j = (int(k) for k in rng.choice(n, size=2, replace=False))
        y[i], y[j] = y[j], y[i]
        log.append((i, j))
    return y, log


def undo_swaps(y, log) -> np.ndarray:
    y = np.array(y, dtype=float)
    for i, j in reversed(log):
        y[i], y[j] = y[j], y[i]
    return y


def grouped_shuffle(y, group_bounds, crossbin_fraction: float, seed: int):
    """Shuffle labels independently inside each group, then mix a few across groups.

    ``ceil(crossbin_fraction * n)`` distinct rows are drawn uniformly; each is
    swapped with a uniformly drawn row from a different group.

    Returns ``(labels, permutation, crossbin_log)`` with ``labels = y[permutation]``.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    bounds = check_bounds(group_bounds, n)
    if not 0.0 <= crossbin_fraction <= 1.0:
        raise InvalidBounds(f"crossbin_fraction must lie in [0, 1], got {crossbin_fraction}")
    n_groups = len(bounds) - 1
    rng = rng_stream(seed)
    p = np.empty(n, dtype=np.int64)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        p[lo:hi] = lo + rng.permutation(hi - lo)

    n_cross = math.ceil(crossbin_fraction * n) if crossbin_fraction > 0 else 0
    if n_cross and n_groups < 2:
        raise InvalidBounds("cross-bin shuffling needs at least two groups")
    group_of = np.repeat(np.arange(n_groups), np.diff(bounds))
    log = []
    for i in rng.choice(n, size=n_cross, replace=False):
        i = int(i)
        g = group_of[i]
        # uniform over rows outside group g
        k = int(rng.integers(n - (bounds[g + 1] - bounds[g])))
        j = k if k < bounds[g] else k + (bounds[g + 1] - bounds[g])
        p[i], p[j] = p[j], p[i]
        log.append((i, j))
    return y[p], p, log
