"""Command line: ``fracheat run`` and ``fracheat table``.

Exit status is 0 when every contract passed, 1 when one failed and 2 for
an invalid config or grid.
"""

import argparse
import hashlib
import itertools
import json
import os
import sys
import time
from dataclasses import replace

from .config import ConfigError, KINDS, load_config, parse_text, validate
from .errors import ConfigurationError
from .experiments import run_experiment
from .parallel import default_workers
from .rng import derive_seed
from .variation import write_rows

MAX_CELLS = 64


def _run_id(echo, started):
    return hashlib.sha1(f"{echo}{started!r}".encode()).hexdigest()[:12]


def _apply_overrides(cfg, seed=None, reps=None):
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if reps is not None:
        changes["replications"] = reps
    return validate(replace(cfg, **changes)) if changes else cfg


def _report_problems(exc):
    problems = getattr(exc, "problems", None) or [("config", str(exc))]
    for key, msg in problems:
        print(f"invalid config: {key}: {msg}", file=sys.stderr)
    return 2


def cmd_run(args):
    started = time.time()
    try:
        cfg = _apply_overrides(load_config(args.config), args.seed, args.reps)
        result = run_experiment(cfg, args.workers)
    except (ConfigError, ConfigurationError) as exc:
        return _report_problems(exc)
    os.makedirs(args.out_dir, exist_ok=True)
    base = os.path.join(args.out_dir, cfg.experiment)
    write_rows(base + ".csv", result.rows, result.columns)
    wall = time.time() - started
    summary = {
        "experiment": cfg.experiment,
        "config": cfg.as_dict(),
        "passed": result.passed,
        "wall_seconds": wall,
        "run_id": _run_id(cfg.echo(), started),
        "contracts": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in result.contracts],
    }
    with open(base + ".json", "w") as fh:
        json.dump(summary, fh, indent=2)
    for c in result.contracts:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    if not result.passed:
        print(f"contract failed: {', '.join(result.failures)}", file=sys.stderr)
        return 1
    return 0


def parse_grid(specs):
    """``["alpha=1.25,1.5", "n=256,512"]`` -> ordered (key, values) pairs."""
    grid = []
    for spec in specs or ():
        key, sep, vals = spec.partition("=")
        key = key.strip()
        if not sep or not vals.strip():
            raise ConfigError([(key or "grid", "expected key=v1,v2,...")])
        grid.append((key, [v.strip() for v in vals.split(",") if v.strip()]))
    return grid


def table_cells(base_text, grid):
    """Validated configs for every cell of the product grid, in row-major order."""
    keys = [k for k, _ in grid]
    cells = list(itertools.product(*(v for _, v in grid))) if grid else []
    if len(cells) > MAX_CELLS:
        raise ConfigError([("grid", f"{len(cells)} cells exceed the limit of {MAX_CELLS}")])
    out = []
    for values in cells:
        lines = [ln for ln in base_text.splitlines() if ln.split("#", 1)[0].split("=", 1)[0].strip() not in keys]
        lines += [f"{k} = {v}" for k, v in zip(keys, values)]
        out.append((dict(zip(keys, values)), "\n".join(lines)))
    return out


def cmd_table(args):
    base = f"experiment = {args.experiment}\n"
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            return _report_problems(exc)
        base = "\n".join(ln for ln in text.splitlines() if ln.split("#", 1)[0].split("=", 1)[0].strip() != "experiment")
        base = f"experiment = {args.experiment}\n" + base
    try:
        grid = parse_grid(args.grid)
        cells = table_cells(base, grid)
        parse_text(base)
        configs = []
        for i, (params, text) in enumerate(cells):
            cfg = parse_text(text)
            seed = derive_seed(args.seed if args.seed is not None else cfg.seed, i)
            configs.append((params, _apply_overrides(cfg, seed, args.reps)))
    except (ConfigError, ConfigurationError) as exc:
        return _report_problems(exc)
    keys = [k for k, _ in grid]
    columns = None
    rows, worst = [], 0
    for i, (params, cfg) in enumerate(configs):
        try:
            result = run_experiment(cfg, args.workers)
        except (ConfigurationError, ArithmeticError) as exc:
            rows.append(dict(cell=i, **params, seed=cfg.seed, passed=False, failures=f"error: {exc}"))
            worst = max(worst, 1)
            continue
        columns = columns or result.columns
        status = dict(cell=i, **params, seed=cfg.seed, passed=result.passed, failures=";".join(result.failures))
        for r in _headline_rows(cfg.experiment, result):
            rows.append({**status, **r})
        if not result.passed:
            worst = 1
    if columns is None:
        columns = _columns_for(args.experiment)
    header = ("cell", *keys, "seed", "passed", "failures", *[c for c in columns if c not in keys])
    os.makedirs(args.out_dir, exist_ok=True)
    write_rows(os.path.join(args.out_dir, f"{args.experiment}-table.csv"), rows, header)
    return worst


def _headline_rows(kind, result):
    """Rows kept per cell: the finest level, or every row for rate sweeps."""
    if kind in ("rate", "kernel-validate", "holder-check", "solver-calibrate"):
        return result.rows
    return result.rows[-1:]


def _columns_for(kind):
    from . import estimation, variation
    from .experiments import CALIBRATION_COLUMNS, HOLDER_COLUMNS, KERNEL_COLUMNS

    return {
        "kernel-validate": KERNEL_COLUMNS,
        "holder-check": HOLDER_COLUMNS,
        "solver-calibrate": CALIBRATION_COLUMNS,
        "estimate-sigma2": estimation.CSV_COLUMNS,
        "estimate-mu": estimation.CSV_COLUMNS,
    }.get(kind, variation.CSV_COLUMNS)


def build_parser():
    p = argparse.ArgumentParser(prog="fracheat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out-dir", default="results")
        sp.add_argument("--seed", type=int, default=None, help="override the base seed")
        sp.add_argument("--workers", type=int, default=default_workers())
        sp.add_argument("--reps", type=int, default=None, help="override the replication count")

    run = sub.add_parser("run", help="run one experiment from a config file")
    run.add_argument("--config", required=True)
    common(run)
    run.set_defaults(func=cmd_run)
    tab = sub.add_parser("table", help="run an experiment over a parameter grid")
    tab.add_argument("experiment", choices=KINDS)
    tab.add_argument("--grid", action="append", metavar="KEY=V1,V2", help="repeat for more axes")
    tab.add_argument("--config", default=None, help="base config for the fixed parameters")
    common(tab)
    tab.set_defaults(func=cmd_table)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
