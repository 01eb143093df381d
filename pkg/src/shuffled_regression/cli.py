"""Command-line entry point: ``shuffled-regression {generate,fit,experiment}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
Outputs go to ``--out-dir``, defaulting to ``$SHUFFLED_REGRESSION_OUT`` or ``./results``.
"""
import argparse
from dataclasses import asdict, replace
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .data_io import equal_group_bounds, read_table, write_dataset_csv, write_manifest
from .errors import ConfigError, InvalidBounds, ShuffledRegressionError
from .estimators import METHODS, EMConfig, GroupedDataset, check_bounds, parameter_error
from .experiments import (
    ExperimentReport,
    run_consistency,
    run_error_sweep,
    run_partial_shuffle,
    run_realdata,
    run_restart_study,
)
from .synthetic import SyntheticSpec, generate

OUT_ENV = "SHUFFLED_REGRESSION_OUT"
DATA_ENV = "SHUFFLED_REGRESSION_DATA"
DEFAULT_SEED = 0
EXIT_CODES = {"usage": 2, "data": 3, "numerical": 4}
PRESETS = ("fig2", "fig3", "fig4", "fig6", "appendixB")
SCALES = ("desk", "full")

log = logging.getLogger("shuffled_regression")


def _default_out():
    return os.environ.get(OUT_ENV, "results")


def _default_boston():
    if DATA_ENV in os.environ:
        return Path(os.environ[DATA_ENV]) / "boston.csv"
    return Path(__file__).resolve().parents[2] / "data" / "boston.csv"


def _add_em_flags(p):
    g = p.add_argument_group("EM settings (defaults: k=50, s=ceil(n ln n), s'=n, g=max(1, n//10), R=n)")
    g.add_argument("--iterations", type=int, help="outer EM iterations k")
    g.add_argument("--sampling-steps", type=int, help="MH steps per iteration s")
    g.add_argument("--burn-steps", type=int, help="burn-in steps s'")
    g.add_argument("--sample-gap", type=int, help="steps between collected samples g")
    g.add_argument("--restarts", type=int, help="Hard EM restarts R")
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--non-cumulative", dest="non_cumulative", action="store_true", default=None,
                      help="each iteration reweights the observed labels")
    mode.add_argument("--cumulative", dest="non_cumulative", action="store_false",
                      help="each iteration reweights the previous iteration's labels (default)")


def _em_config(args, seed):
    cfg = EMConfig(seed=seed)
    overrides = dict(iterations=args.iterations, sampling_steps=args.sampling_steps, burn_steps=args.burn_steps,
                     sample_gap=args.sample_gap, restarts=args.restarts, non_cumulative=args.non_cumulative)
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def build_parser():
    parser = argparse.ArgumentParser(prog="shuffled-regression",
                                     description="Linear regression with shuffled labels: Stochastic EM and Hard EM.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per trial to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset, its truth sidecar and a manifest")
    p.add_argument("--n", type=int, required=True, help="number of rows")
    p.add_argument("--d", type=int, required=True, help="number of features")
    p.add_argument("--sigma", type=float, default=1.0, help="noise standard deviation (default 1)")
    p.add_argument("--shuffle", choices=("full", "identity", "grouped"), default="full",
                   help="label shuffle (default full)")
    p.add_argument("--groups", type=int, help="number of equal contiguous groups for --shuffle grouped")
    p.add_argument("--crossbin-fraction", type=float, default=0.0, help="fraction of rows swapped across groups")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--name", default="dataset", help="output file stem (default dataset)")
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")

    p = sub.add_parser("fit", help="fit one estimator to a dataset CSV")
    p.add_argument("--data", required=True, help="dataset CSV with a header row")
    p.add_argument("--label", default="y", help="label column (default y)")
    p.add_argument("--method", choices=tuple(METHODS), default="stochastic-em", help="estimator (default stochastic-em)")
    p.add_argument("--groups", help="an integer G (equal contiguous groups) or a file of group boundaries")
    p.add_argument("--group-by", help="sort rows by this feature column before forming --groups")
    p.add_argument("--truth", help="truth sidecar JSON from generate; adds the parameter error")
    p.add_argument("--intercept", action="store_true", help="append a column of ones")
    p.add_argument("--ols-init-restart", action="store_true", help="Hard EM: make restart 0 start from OLS on y")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--name", default="fit", help="output file stem (default fit)")
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")
    _add_em_flags(p)

    p = sub.add_parser("experiment", help="run a preset experiment and write its report")
    p.add_argument("--preset", required=True, choices=PRESETS, help="experiment preset")
    p.add_argument("--scale", choices=SCALES, default="desk", help="problem sizes (default desk)")
    p.add_argument("--data", help=f"Boston-format CSV for fig6 (default data/boston.csv or ${DATA_ENV})")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")
    _add_em_flags(p)
    return parser


def _out_dir(args):
    out = Path(args.out_dir or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args):
    spec = SyntheticSpec(args.n, args.d, args.sigma, args.seed)
    bounds = None
    if args.shuffle == "grouped":
        if args.groups is None:
            raise ConfigError("--shuffle grouped needs --groups")
        bounds = equal_group_bounds(args.n, args.groups)
    inst = generate(spec, args.shuffle, bounds, args.crossbin_fraction)
    out = _out_dir(args)
    data_path = out / f"{args.name}.csv"
    truth_path = out / f"{args.name}.truth.json"
    write_dataset_csv(data_path, inst.X, inst.y_observed)
    with open(truth_path, "w", encoding="utf-8") as f:
        json.dump(dict(w_true=inst.w_true.tolist(), pi_true=inst.pi_true.tolist(),
                       group_bounds=None if bounds is None else bounds.tolist()), f, indent=2)
        f.write("\n")
    write_manifest(out / f"{args.name}.manifest.json", command="generate", version=__version__,
                   spec=asdict(spec), shuffle=args.shuffle, groups=args.groups,
                   crossbin_fraction=args.crossbin_fraction, outputs=[data_path.name, truth_path.name])
    print(data_path)


def _read_bounds(text, n):
    if text.strip().isdigit():
        return equal_group_bounds(n, int(text))
    path = Path(text)
    if not path.exists():
        raise InvalidBounds(f"--groups {text!r} is neither an integer nor an existing file")
    try:
        values = [int(v) for v in path.read_text().replace(",", " ").split()]
    except ValueError as e:
        raise InvalidBounds(f"{path}: group boundaries must be integers ({e})") from None
    return check_bounds(values, n)


def cmd_fit(args):
    table = read_table(args.data, args.label)
    X, y = table.X, table.y
    truth = None
    if args.truth:
        with open(args.truth, encoding="utf-8") as f:
            truth = np.asarray(json.load(f)["w_true"], dtype=float)
    if args.group_by:
        if args.group_by not in table.feature_names:
            raise ConfigError(f"--group-by {args.group_by!r} not among {table.feature_names}")
        order = np.argsort(X[:, table.feature_names.index(args.group_by)], kind="stable")
        X, y = X[order], y[order]
    if args.intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    bounds = _read_bounds(args.groups, X.shape[0]) if args.groups else None
    cfg = replace(_em_config(args, args.seed), ols_init_restart=args.ols_init_restart)

    data = GroupedDataset(X, y, bounds if bounds is not None else [0, X.shape[0]])
    res = METHODS[args.method](data, cfg)
    weights, sigma2, rss, trace = res.weights, res.sigma2, res.residual_ss, res.trace

    out = _out_dir(args)
    fit_path = out / f"{args.name}.fit.csv"
    names = table.feature_names + (["intercept"] if args.intercept else [])
    with open(fit_path, "w", encoding="utf-8") as f:
        f.write("key,value\n")
        f.write(f"method,{args.method}\n")
        f.write(f"sigma2,{sigma2!r}\n")
        f.write(f"residual_ss,{rss!r}\n")
        if truth is not None:
            f.write(f"parameter_error,{parameter_error(weights, truth)!r}\n")
        for name, w in zip(names, weights):
            f.write(f"w[{name}],{float(w)!r}\n")
    trace_path = out / f"{args.name}.trace.csv"
    with open(trace_path, "w", encoding="utf-8") as f:
        f.write(",".join(["iteration", "residual_ss", "acceptance_rate"] + [f"w[{c}]" for c in names]) + "\n")
        for m, t in enumerate(trace, start=1):
            f.write(",".join([str(m), repr(t.residual_ss), repr(t.acceptance_rate)]
                             + [repr(float(w)) for w in t.weights]) + "\n")
    inputs = {"data": args.data}
    if args.truth:
        inputs["truth"] = args.truth
    write_manifest(out / f"{args.name}.manifest.json", command="fit", version=__version__, method=args.method,
                   config=asdict(cfg.resolve(X.shape[0], sampler=args.method == "stochastic-em")),
                   non_cumulative=cfg.non_cumulative, intercept=args.intercept, group_by=args.group_by,
                   group_bounds=None if bounds is None else bounds.tolist(), inputs=inputs,
                   outputs=[fit_path.name, trace_path.name])
    print(fit_path)


def preset_plan(preset, scale):
    """Experiment arguments for a preset; ``scale="full"`` uses the original study sizes."""
    full = scale == "full"
    if preset == "fig2":
        n_values = list(range(100, 1001, 100)) if full else [100, 200]
        return dict(n_values=n_values, d=30 if full else 10, sigma=1.0, trials=10 if full else 5)
    if preset == "fig3":
        return dict(n=250, d=20, reorderings=25, sigma=1.0)
    if preset == "fig4":
        return dict(n=200, d=20, max_swaps=100 if full else 30, stride=5, series=5, sigma=0.3)
    if preset == "fig6":
        return dict(pipeline="feature_grouped", G_values=[3, 4], crossbin_fraction=0.0, repeats=5,
                    label="LSTAT", group_feature="MEDV")
    if preset == "appendixB":
        return dict(n=100, d_values=[2, 5, 10, 20] if full else [2, 20], restart_counts=[1, 10, 100, 1000],
                    sigma=0.3, trials=10)
    raise ConfigError(f"unknown preset {preset!r}; expected one of {PRESETS}")


def run_preset(preset, scale, cfg, seed=DEFAULT_SEED, jobs=1, data=None) -> ExperimentReport:
    plan = preset_plan(preset, scale)
    if preset == "fig2":
        return run_error_sweep(plan["n_values"], plan["d"], plan["sigma"], plan["trials"], cfg, seed=seed, jobs=jobs)
    if preset == "fig3":
        return run_consistency(plan["n"], plan["d"], plan["reorderings"], cfg, sigma=plan["sigma"], seed=seed,
                               jobs=jobs)
    if preset == "fig4":
        return run_partial_shuffle(plan["n"], plan["d"], plan["max_swaps"], plan["stride"], plan["series"], cfg,
                                   sigma=plan["sigma"], seed=seed, jobs=jobs)
    if preset == "fig6":
        table = read_table(data or _default_boston(), plan["label"])
        report = ExperimentReport("realdata", config=dict(plan, data=str(data or _default_boston())))
        for G in plan["G_values"]:
            part = run_realdata(table, plan["pipeline"], G, plan["crossbin_fraction"], cfg, repeats=plan["repeats"],
                                seed=seed, group_feature=plan["group_feature"], jobs=jobs)
            report.rows.extend(part.rows)
        return report
    return run_restart_study(plan["n"], plan["d_values"], plan["restart_counts"], cfg, sigma=plan["sigma"],
                             seed=seed, trials=plan["trials"], jobs=jobs)


def cmd_experiment(args):
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    cfg = _em_config(args, args.seed)
    report = run_preset(args.preset, args.scale, cfg, args.seed, args.jobs, args.data)
    out = _out_dir(args)
    path = out / f"{args.preset}_{args.scale}.csv"
    report.to_csv(path, timing=args.timing)
    inputs = {"data": args.data or _default_boston()} if args.preset == "fig6" else {}
    write_manifest(out / f"{args.preset}_{args.scale}.manifest.json", command="experiment", version=__version__,
                   preset=args.preset, scale=args.scale, seed=args.seed, em_config=asdict(cfg),
                   non_cumulative=cfg.non_cumulative, report_config=report.config, inputs=inputs, outputs=[path.name])
    print(path)


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "experiment": cmd_experiment}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except ShuffledRegressionError as e:
        print(f"error[{e.category}]: {e}", file=sys.stderr)
        return EXIT_CODES.get(e.category, 3)
    except (OSError, json.JSONDecodeError, KeyError) as e:
        print(f"error[data]: {e}", file=sys.stderr)
        return EXIT_CODES["data"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
