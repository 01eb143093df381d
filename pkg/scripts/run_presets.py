#!/usr/bin/env python3
"""Run experiment presets and write one report CSV (plus manifest) per preset.

    python scripts/run_presets.py                      # every preset, desk scale
    python scripts/run_presets.py fig4 fig6 --jobs 4   # a subset
    python scripts/run_presets.py --scale full         # original study sizes (hours)
"""
import argparse
import sys
import time

from shuffled_regression.cli import PRESETS, SCALES, main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("presets", nargs="*", default=list(PRESETS), help=f"subset of {', '.join(PRESETS)}")
    p.add_argument("--scale", choices=SCALES, default="desk")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    status = 0
    for preset in args.presets:
        argv = ["-v", "experiment", "--preset", preset, "--scale", args.scale, "--jobs", str(args.jobs),
                "--seed", str(args.seed), "--timing"]
        if args.out_dir:
            argv += ["--out-dir", args.out_dir]
        t0 = time.perf_counter()
        code = main(argv)
        print(f"{preset}: exit {code} after {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        status = status or code
    sys.exit(status)
