#!/usr/bin/env python3
"""Print the mean/std aggregate rows of report CSVs as a table.

    python scripts/summarize_report.py results/fig4_desk.csv
"""
import csv
import sys


def summarize(path):
    stats = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["trial"] in ("mean", "std"):
                key = (row["metric_name"], row["d"], row["G"], row["n"], row["method"])
                stats.setdefault(key, {})[row["trial"]] = float(row["metric_value"])
    print(path)
    print(f"{'metric':<28}{'n':>6}{'d':>5}{'G':>4}  {'method':<16}{'mean':>12}{'std':>12}")
    for (metric, d, G, n, method), s in stats.items():
        print(f"{metric:<28}{n:>6}{d:>5}{G:>4}  {method:<16}{s['mean']:>12.5f}{s['std']:>12.5f}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    for p in sys.argv[1:]:
        summarize(p)
