"""Run every config in scripts/configs and print a one-line status per experiment.

    python3 scripts/run_all.py --out-dir results [--reps 50] [--only rate,linear-qv]
"""

import argparse
import pathlib
import sys
import time

from fracheat.cli import main

HERE = pathlib.Path(__file__).resolve().parent


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="results")
    p.add_argument("--reps", type=int, default=None, help="override every replication count")
    p.add_argument("--only", default="", help="comma separated experiment names")
    return p.parse_args()


def run():
    args = parse_args()
    wanted = {s for s in args.only.split(",") if s}
    worst = 0
    for cfg in sorted((HERE / "configs").glob("*.cfg")):
        if wanted and cfg.stem not in wanted:
            continue
        argv = ["run", "--config", str(cfg), "--out-dir", args.out_dir]
        if args.reps is not None and cfg.stem != "kernel-validate":
            argv += ["--reps", str(args.reps)]
        t0 = time.time()
        code = main(argv)
        print(f"== {cfg.stem}: exit {code} in {time.time() - t0:.1f}s", flush=True)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run())
