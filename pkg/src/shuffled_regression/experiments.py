"""Experiment drivers emitting tidy CSV reports.

Every row carries the seed that reproduces it. Trials are independent units
and may run in worker processes; rows are always assembled in unit order, so
the report does not depend on ``jobs``.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import csv
import logging
import time
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data_io import (
    RawTable,
    add_intercept,
    group_by_feature,
    group_by_label_quantiles,
    normalize_labels,
    split_train_test,
)
from .estimators import (
    EMConfig,
    GroupedDataset,
    better_restart,
    fit_hard_em,
    fit_hard_em_grouped,
    fit_ols_baseline,
    fit_stochastic_em,
    fit_stochastic_em_grouped,
    hard_em_restarts,
    parameter_error,
    rng_stream,
)
from .errors import ConfigError
from .synthetic import SyntheticSpec, generate, grouped_shuffle, progressive_shuffle

COLUMNS = ("experiment", "method", "n", "d", "sigma", "G", "seed", "trial", "metric_name", "metric_value", "wall_ms")
GROUP_KEY = ("experiment", "method", "n", "d", "sigma", "G", "metric_name")


def derive_seed(base: int, *key: int) -> int:
    """Deterministic 63-bit child seed of ``base`` for the integer path ``key``."""
    state = np.random.SeedSequence(int(base), spawn_key=tuple(int(k) for k in key)).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


def _fmt(v):
    if v is None or v == "":
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ExperimentReport:
    experiment: str
    rows: List[Dict] = field(default_factory=list)
    config: Dict = field(default_factory=dict)

    def values(self, metric_name: str, method: Optional[str] = None, **match) -> np.ndarray:
        out = []
        for r in self.rows:
            if r["metric_name"] != metric_name or (method is not None and r["method"] != method):
                continue
            if all(r.get(k) == v for k, v in match.items()):
                out.append(r["metric_value"])
        return np.array(out, dtype=float)

    def aggregates(self) -> List[Dict]:
        """Mean and sample standard deviation (ddof=1; 0 for a single row) per
        (method, n, d, sigma, G, metric_name), in first-appearance order."""
        groups: Dict[tuple, List[float]] = {}
        for r in self.rows:
            groups.setdefault(tuple(r[k] for k in GROUP_KEY), []).append(r["metric_value"])
        out = []
        for key, vals in groups.items():
            vals = np.asarray(vals, dtype=float)
            std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            base = dict(zip(GROUP_KEY, key), seed="", wall_ms="")
            out.append(dict(base, trial="mean", metric_value=float(np.mean(vals))))
            out.append(dict(base, trial="std", metric_value=std))
        return out

    def to_csv(self, path, timing: bool = False):
        """Per-trial rows then aggregate rows. ``wall_ms`` is left blank unless
        ``timing`` so that reruns are byte-identical."""
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(COLUMNS)
            for r in self.rows + self.aggregates():
                r = dict(r)
                if not timing:
                    r["wall_ms"] = ""
                w.writerow([_fmt(r[c]) for c in COLUMNS])


def _row(experiment, method, n, d, sigma, G, seed, trial, metric_name, value, wall_ms):
    return dict(
        experiment=experiment, method=method, n=n, d=d, sigma=sigma, G=G, seed=seed,
        trial=trial, metric_name=metric_name, metric_value=float(value), wall_ms=wall_ms,
    )


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, round((time.perf_counter() - t0) * 1000.0, 3)


def _run_units(fn, units, jobs):
    if jobs is None or jobs <= 1 or len(units) <= 1:
        results = [fn(*u) for u in units]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, *zip(*units)))
    return [row for rows in results for row in rows]


logger = logging.getLogger("shuffled_regression")


def _log(msg):
    logger.info(msg)


# parameter error vs n


def _sweep_unit(n, d, sigma, trial, seed, shuffle, cfg):
    inst = generate(SyntheticSpec(n, d, sigma, seed), shuffle)
    cfg = replace(cfg, seed=seed)
    rows = []
    for method, fit in (("hard-em", fit_hard_em), ("stochastic-em", fit_stochastic_em)):
        res, ms = _timed(fit, inst.X, inst.y_observed, cfg)
        rows.append(_row("error_sweep", method, n, d, sigma, 1, seed, trial, "param_error",
                         parameter_error(res.weights, inst.w_true), ms))
    _log(f"error_sweep n={n} trial={trial} done")
    return rows


def run_error_sweep(n_values, d, sigma, trials, cfg=EMConfig(), seed=0, shuffle="full", jobs=1):
    if any(n <= d for n in n_values):
        raise ConfigError(f"every n must exceed d={d}, got {list(n_values)}")
    units = [(n, d, sigma, t, derive_seed(seed, n, t), shuffle, cfg) for n in n_values for t in range(trials)]
    report = ExperimentReport("error_sweep", config=dict(n_values=list(n_values), d=d, sigma=sigma,
                                                         trials=trials, seed=seed, shuffle=shuffle))
    report.rows = _run_units(_sweep_unit, units, jobs)
    return report


# consistency across reorderings of the labels


def _consistency_unit(inst_args, r, order_seed, cfg):
    n, d, sigma, seed = inst_args
    inst = generate(SyntheticSpec(n, d, sigma, seed))
    y = inst.y_observed[rng_stream(order_seed).permutation(n)]
    rows = []
    for method, fit in (("hard-em", fit_hard_em), ("stochastic-em", fit_stochastic_em)):
        res, ms = _timed(fit, inst.X, y, cfg)
        for m, entry in enumerate(res.trace, start=1):
            rows.append(_row("consistency", method, n, d, sigma, 1, order_seed, r, f"param_error@iter={m}",
                             parameter_error(entry.weights, inst.w_true), ""))
        rows.append(_row("consistency", method, n, d, sigma, 1, order_seed, r, "param_error",
                         parameter_error(res.weights, inst.w_true), ms))
    _log(f"consistency reordering={r} done")
    return rows


def run_consistency(n, d, reorderings, cfg=EMConfig(), sigma=1.0, seed=0, reorder_seeds=None, jobs=1):
    """One dataset fitted from ``reorderings`` random initial label orders.

    ``reorder_seeds`` overrides the per-run ordering seeds (default: derived
    from ``seed``). Estimator randomness uses ``cfg.seed`` for every run.
    """
    if reorderings < 2:
        raise ConfigError(f"need at least 2 reorderings, got {reorderings}")
    if reorder_seeds is None:
        reorder_seeds = [derive_seed(seed, 1, r) for r in range(reorderings)]
    if len(reorder_seeds) != reorderings:
        raise ConfigError("reorder_seeds must have one seed per reordering")
    units = [((n, d, sigma, seed), r, s, cfg) for r, s in enumerate(reorder_seeds)]
    report = ExperimentReport("consistency", config=dict(n=n, d=d, sigma=sigma, reorderings=reorderings,
                                                         seed=seed, reorder_seeds=list(reorder_seeds)))
    report.rows = _run_units(_consistency_unit, units, jobs)
    return report


# progressively shuffled labels


def partial_shuffle_points(max_swaps, stride):
    return list(range(0, max_swaps // stride * stride + 1, stride))


def _partial_unit(inst_args, series, series_seed, max_swaps, stride, cfg):
    n, d, sigma, seed = inst_args
    inst = generate(SyntheticSpec(n, d, sigma, seed), "identity")
    _, log = progressive_shuffle(inst.y_observed, max_swaps, series_seed)
    y = np.array(inst.y_observed)
    done = 0
    rows = []
    hard_cfg = replace(cfg, ols_init_restart=True)
    for m in partial_shuffle_points(max_swaps, stride):
        for i, j in log[done:m]:
            y[i], y[j] = y[j], y[i]
        done = m
        arms = (
            ("hard-em", fit_hard_em, (inst.X, y, hard_cfg)),
            ("stochastic-em", fit_stochastic_em, (inst.X, y, cfg)),
            ("ols", fit_ols_baseline, (inst.X, y)),
        )
        for method, fit, args in arms:
            res, ms = _timed(fit, *args)
            rows.append(_row("partial_shuffle", method, n, d, sigma, 1, series_seed, series,
                             f"param_error@swaps={m}", parameter_error(res.weights, inst.w_true), ms))
    _log(f"partial_shuffle series={series} done")
    return rows


def run_partial_shuffle(n, d, max_swaps, stride, series, cfg=EMConfig(), sigma=0.3, seed=0, jobs=1):
    """Fit after every ``stride`` random swaps of an initially aligned label vector.

    Hard EM always includes a restart initialized by OLS on the current labels.
    """
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    units = [((n, d, sigma, seed), s, derive_seed(seed, 2, s), max_swaps, stride, cfg) for s in range(series)]
    report = ExperimentReport("partial_shuffle", config=dict(n=n, d=d, sigma=sigma, max_swaps=max_swaps,
                                                             stride=stride, series=series, seed=seed))
    report.rows = _run_units(_partial_unit, units, jobs)
    return report


# grouped real data


PIPELINES = ("label_grouped", "feature_grouped")


def _realdata_unit(table, pipeline, G, crossbin_fraction, cfg, r, seed, test_fraction, group_feature, intercept):
    X = add_intercept(table.X) if intercept else table.X
    y, _ = normalize_labels(table.y)
    if pipeline == "label_grouped":
        grouped = group_by_label_quantiles(X, y, G)
    else:
        grouped = group_by_feature(X, y, table.feature_names.index(group_feature), G)
    shuffle_seed = derive_seed(seed, 3, r)
    y_shuffled, _, _ = grouped_shuffle(grouped.y, grouped.group_bounds, crossbin_fraction, shuffle_seed)
    shuffled = GroupedDataset(grouped.X, y_shuffled, grouped.group_bounds)
    split = split_train_test(shuffled, test_fraction, derive_seed(seed, 4, r), y_true=grouped.y)
    train = split.train
    em_cfg = replace(cfg, seed=shuffle_seed)
    arms = (
        ("ols-shuffled", lambda: fit_ols_baseline(train.X, train.y)),
        ("hard-em", lambda: fit_hard_em_grouped(train, em_cfg)),
        ("stochastic-em", lambda: fit_stochastic_em_grouped(train, em_cfg)),
        ("ols-unshuffled", lambda: fit_ols_baseline(train.X, split.train_y_true)),
    )
    n, d = X.shape
    rows = []
    for method, fit in arms:
        res, ms = _timed(fit)
        resid = split.test_X @ res.weights - split.test_y
        rows.append(_row("realdata", method, n, d, "", G, shuffle_seed, r, "test_mse", float(np.mean(resid**2)), ms))
    _log(f"realdata G={G} repeat={r} done")
    return rows


def run_realdata(table: RawTable, pipeline: str, G: int, crossbin_fraction: float = 0.0, cfg=EMConfig(),
                 repeats=5, seed=0, test_fraction=0.2, group_feature=None, intercept=False, jobs=1):
    """Compare OLS on shuffled labels, grouped Hard EM, grouped Stochastic EM and
    OLS on the true labels by test MSE.

    Per repeat: labels are rescaled to [0, 1], rows are sorted into ``G``
    equal groups (by label, or by ``group_feature``), labels are shuffled
    within groups (plus ``crossbin_fraction`` cross-group swaps), and an
    ``test_fraction`` split is drawn. All four arms share that split.
    """
    if pipeline not in PIPELINES:
        raise ConfigError(f"unknown pipeline {pipeline!r}; expected one of {PIPELINES}")
    if pipeline == "feature_grouped" and group_feature not in table.feature_names:
        raise ConfigError(f"group feature {group_feature!r} not among {table.feature_names}")
    units = [(table, pipeline, G, crossbin_fraction, cfg, r, seed, test_fraction, group_feature, intercept)
             for r in range(repeats)]
    report = ExperimentReport("realdata", config=dict(pipeline=pipeline, G=G, crossbin_fraction=crossbin_fraction,
                                                      repeats=repeats, seed=seed, test_fraction=test_fraction,
                                                      group_feature=group_feature, intercept=intercept,
                                                      label=table.label, features=table.feature_names))
    report.rows = _run_units(_realdata_unit, units, jobs)
    return report


# Hard EM restart count


def _restart_unit(n, d, sigma, trial, seed, restart_counts, cfg):
    inst = generate(SyntheticSpec(n, d, sigma, seed))
    data = GroupedDataset.single(inst.X, inst.y_observed)
    counts = sorted(set(restart_counts))
    rows = []
    t0 = time.perf_counter()
    best = None
    for r, trace, _, _ in hard_em_restarts(data, replace(cfg, seed=seed, restarts=counts[-1])):
        if better_restart(trace[-1].residual_ss, best and best[-1].residual_ss):
            best = trace
        if r + 1 in counts:
            ms = round((time.perf_counter() - t0) * 1000.0, 3)
            rows.append(_row("restart_study", "hard-em", n, d, sigma, 1, seed, trial, f"param_error@restarts={r + 1}",
                             parameter_error(best[-1].weights, inst.w_true), ms))
    res, ms = _timed(fit_stochastic_em, inst.X, inst.y_observed, replace(cfg, seed=seed))
    rows.append(_row("restart_study", "stochastic-em", n, d, sigma, 1, seed, trial, "param_error",
                     parameter_error(res.weights, inst.w_true), ms))
    _log(f"restart_study d={d} trial={trial} done")
    return rows


def run_restart_study(n, d_values, restart_counts, cfg=EMConfig(), sigma=0.3, seed=0, trials=1, jobs=1):
    """Hard EM parameter error against the number of restarts, per dimension and
    dataset, with Stochastic EM on the same dataset as reference.

    Restart streams are nested, so the best of the first ``R`` restarts is
    exactly what ``fit_hard_em`` returns with ``restarts=R``.
    """
    if not restart_counts or min(restart_counts) < 1:
        raise ConfigError("restart_counts must be positive")
    units = [(n, d, sigma, t, derive_seed(seed, 5, d, t), restart_counts, cfg) for d in d_values for t in range(trials)]
    report = ExperimentReport("restart_study", config=dict(n=n, d_values=list(d_values), sigma=sigma, trials=trials,
                                                           restart_counts=list(restart_counts), seed=seed))
    report.rows = _run_units(_restart_unit, units, jobs)
    return report
