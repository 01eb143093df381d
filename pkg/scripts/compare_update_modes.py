#!/usr/bin/env python3
"""Compare the two Stochastic EM label updates on the partial-shuffle and Boston settings.

``non_cumulative=True`` reweights the observed labels at every iteration;
``False`` reweights the previous iteration's labels. Prints mean errors.
"""
from dataclasses import replace
from pathlib import Path

from shuffled_regression import EMConfig
from shuffled_regression.data_io import read_table
from shuffled_regression.experiments import run_partial_shuffle, run_realdata

BOSTON = Path(__file__).resolve().parents[1] / "data" / "boston.csv"


def main():
    table = read_table(BOSTON, "LSTAT")
    for non_cumulative in (True, False):
        cfg = replace(EMConfig(), non_cumulative=non_cumulative)
        part = run_partial_shuffle(200, 20, 15, 5, 3, cfg, sigma=0.3)
        real = run_realdata(table, "feature_grouped", 3, 0.0, cfg, repeats=5, group_feature="MEDV")
        errs = ", ".join(f"{m}: {part.values(f'param_error@swaps={m}', 'stochastic-em').mean():.3f}"
                         for m in (0, 5, 10, 15))
        print(f"non_cumulative={non_cumulative}")
        print(f"  partial shuffle param error by swaps  {errs}")
        print(f"  Boston G=3 test MSE  SEM {real.values('test_mse', 'stochastic-em').mean():.5f}  "
              f"negative control {real.values('test_mse', 'ols-shuffled').mean():.5f}")


if __name__ == "__main__":
    main()
