"""Run a benchmark config and print coverage, relative-width and score tables.

    python scripts/reproduce_tables.py --config configs/all_functions_desk.yaml --out results/all

Coverage and relative width are printed per level as method x function
grids; the score table lists mean KS-PIT and the negated mean SCRPS (lower
is better for both).  The full output bundle is written to ``--out``.
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from calibgp.benchmarks.experiment import aggregate_coverage, aggregate_scores, run_experiment
from calibgp.config import load_config
from calibgp.output import write_bundle


def grid(rows, value, functions, methods, fmt="{:.2f}"):
    cell = {(r.function, r.method): value(r) for r in rows}
    width = max(len(m) for m in methods) + 2
    head = "".join(f"{f[:16]:>17s}" for f in functions)
    lines = [f"{'method':<{width}s}{head}"]
    for m in methods:
        vals = "".join(f"{(fmt.format(cell[(f, m)]) if (f, m) in cell else '-'):>17s}" for f in functions)
        lines.append(f"{m:<{width}s}{vals}")
    return "\n".join(lines)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=Path("configs/all_functions_desk.yaml"))
    ap.add_argument("--out", type=Path, default=Path("results/tables"))
    ap.add_argument("--reps", type=int)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args(argv)

    config = load_config(args.config)
    if args.reps is not None:
        config = replace(config, repetitions=args.reps)

    def progress(i, n):
        print(f"\r{i}/{n} repetitions", end="", file=sys.stderr, flush=True)

    records = run_experiment(config, workers=args.workers, progress=progress)
    print(file=sys.stderr)
    write_bundle(records, config, args.out)

    functions = list(config.functions)
    methods = [m.label for m in config.methods]
    cov = aggregate_coverage(records)
    for level in config.levels:
        at = [r for r in cov if r.level == level]
        print(f"\nmean coverage at level {level:g}")
        print(grid(at, lambda r: r.mean_coverage, functions, methods))
        print(f"\nmean width relative to gp at level {level:g}")
        print(grid(at, lambda r: r.mean_rel_width, functions, methods))
    scores = [s for s in aggregate_scores(records) if s.method != "j+gp"]
    dist_methods = [m for m in methods if not m.startswith("j+gp")]
    print("\nmean KS-PIT")
    print(grid(scores, lambda s: s.mean_ks_pit, functions, dist_methods))
    print("\nnegated mean SCRPS")
    print(grid(scores, lambda s: -s.mean_scrps, functions, dist_methods))
    failed = sum(r.error is not None for r in records)
    print(f"\n{len(records)} runs, {failed} failed; bundle in {args.out}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
