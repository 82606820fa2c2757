"""Command-line front end.

::

    calibgp run --config CFG.yaml --out DIR [--seed N] [--reps N] [--full-scale]
    calibgp cdf --data DATA.csv --method {gp,cps-gp,bcr-gp} --x 0.1,0.2 [--tau T] [--out PATH]
    calibgp selftest

The worker count of ``run`` comes from the ``CALIBGP_WORKERS`` environment
variable (default 1).  Exit status: 0 on success, 1 when runs or checks
failed, 2 on usage, config or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bcr
from .config import ConfigError, load_config
from .cps import cps_predictive
from .gn import GNParams
from .gp_core import ConvergenceWarning, Dataset, build_gp, fit_ml, loo_residuals, predict
from .metrics import DiracPredictive, GaussianPredictive
from .output import atomic_write, fmt, summary_table, write_bundle

FULL_SCALE = {"repetitions": 100, "n_test": 4000}
TRACE_POINTS = 401


class InputError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="calibgp", description="Calibrated GP predictive distributions.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark sweep from a YAML config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", required=True, type=Path)
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--reps", type=int, help="override the number of repetitions")
    r.add_argument("--full-scale", action="store_true", help="100 repetitions and 4000 test points")
    r.add_argument("--quiet", action="store_true")

    c = sub.add_parser("cdf", help="predictive CDF trace at one input")
    c.add_argument("--data", required=True, type=Path, help="CSV: d coordinate columns then the response")
    c.add_argument("--method", required=True, choices=("gp", "cps-gp", "bcr-gp"))
    c.add_argument("--x", required=True, help="comma-separated coordinates")
    c.add_argument("--tau", type=float, default=0.5, help="randomization level of the stepwise CDF")
    c.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    c.add_argument("--theta", help="GN shape,scale for bcr-gp; skips posterior sampling")
    c.add_argument("--rule", choices=("variance", "ks-pit"), default="variance")
    c.add_argument("--delta", type=float, default=0.1)
    c.add_argument("--regularity", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)

    sub.add_parser("selftest", help="run the built-in oracle checks")
    return p


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.full_scale:
        config = replace(config, **FULL_SCALE)
    if args.reps is not None:
        config = replace(config, repetitions=args.reps)
    if args.seed is not None:
        config = replace(config, seed=args.seed)

    from .benchmarks.experiment import run_experiment

    def progress(i, n):
        if not args.quiet:
            print(f"\r[{i}/{n}] repetitions done", end="", file=sys.stderr, flush=True)

    records = run_experiment(config, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    paths = write_bundle(records, config, args.out)
    print(summary_table(records, 0.9 if 0.9 in config.levels else config.levels[0]))
    print(f"wrote {len(paths)} files to {args.out}")
    failed = [r for r in records if r.error]
    if failed:
        print(f"{len(failed)} run(s) failed; see summary.json", file=sys.stderr)
        return 1
    return 0


def read_dataset(path: Path, x_extra=None) -> Dataset:
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise InputError(f"data file not found: {path}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 3:
        raise InputError(f"{path}: need a header line and at least 2 data rows")
    try:
        arr = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric value ({exc})") from None
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InputError(f"{path}: need at least one coordinate column and one response column")
    X, z = arr[:, :-1], arr[:, -1]
    if x_extra is not None and np.size(x_extra) != X.shape[1]:
        raise InputError(f"--x has {np.size(x_extra)} coordinates but the data has {X.shape[1]}")
    pts = X if x_extra is None else np.vstack([X, x_extra])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    hi = np.where(hi > lo, hi, lo + 1.0)
    try:
        return Dataset(X, z, np.column_stack([lo, hi]))
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def cdf_trace(pred):
    """(z, F) pairs: both jump limits for stepwise and Dirac laws, a grid for smooth ones."""
    if isinstance(pred, DiracPredictive):
        v = float(pred.value[0])
        return [(v, 0.0), (v, 1.0)]
    if hasattr(pred, "sorted_thresholds"):
        out = []
        for c in np.unique(pred.sorted_thresholds[0]):
            out.append((float(c), float(pred.left_cdf(c)[0])))
            out.append((float(c), float(pred.right_cdf(c)[0])))
        return out
    # equally spaced probabilities keep F increments visible at 6 digits in the tails
    p = np.linspace(0.0, 1.0, TRACE_POINTS + 2)[1:-1]
    z = pred.quantile(p[:, None])[:, 0]
    return list(zip(z.tolist(), pred.cdf(z[:, None])[:, 0].tolist()))


def cmd_cdf(args) -> int:
    try:
        x = np.array([float(v) for v in args.x.split(",")])
    except ValueError:
        raise InputError(f"--x must be comma-separated numbers, got {args.x!r}") from None
    ds = read_dataset(args.data, x)
    if not 0.0 <= args.tau <= 1.0:
        raise InputError("--tau must lie in [0, 1]")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        params = fit_ml(ds, args.regularity, seed=args.seed)
    gp = build_gp(ds, params)
    post = predict(gp, x)
    on_design = post.sd[0] == 0.0
    if args.method == "gp":
        pred = DiracPredictive(post.mean) if on_design else GaussianPredictive(post.mean, post.sd)
    elif args.method == "cps-gp":
        pred = cps_predictive(gp, x, args.tau, dirac_on_design=True)
        if on_design:
            print("x is a design point: the conformal predictive law is a Dirac mass", file=sys.stderr)
    else:
        if args.theta:
            try:
                shape, scale = (float(v) for v in args.theta.split(","))
                theta = GNParams(shape, scale)
            except ValueError:
                raise InputError(f"--theta must be 'shape,scale' with positive values, got {args.theta!r}") from None
        else:
            draws = bcr.posterior_sample(loo_residuals(gp), seed=args.seed)
            if args.rule == "variance":
                theta = bcr.select_rule1(draws, args.delta)
            else:
                theta = bcr.select_rule2(draws, args.delta, seed=args.seed)
            print(f"selected GN shape={theta.shape:.6g} scale={theta.scale:.6g}", file=sys.stderr)
        pred = DiracPredictive(post.mean) if on_design else bcr.BcrPredictive(post.mean, post.sd, theta)
    rows = [(fmt(z), fmt(f)) for z, f in cdf_trace(pred)]
    if not isinstance(pred, DiracPredictive) and not hasattr(pred, "sorted_thresholds"):
        # drop smooth-trace rows that print like their predecessor in either column
        rows = [r for i, r in enumerate(rows) if i == 0 or (r[0] != rows[i - 1][0] and r[1] != rows[i - 1][1])]
    lines = [f"{z},{f}\n" for z, f in rows]
    text = "z,F\n" + "".join(lines)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 1


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": cmd_run, "cdf": cmd_cdf, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
