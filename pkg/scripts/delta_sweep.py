"""Coverage and KS-PIT of the variance selection rule across tolerances.

    python scripts/delta_sweep.py --function goldstein_price --deltas 0.01 0.05 0.1 0.2 0.4

Writes ``delta_sweep.csv`` (function, delta, level, mean_coverage,
mean_rel_width, mean_ks_pit) to ``--out`` next to the usual bundle and
prints it.
"""

import argparse
import sys
from pathlib import Path

from calibgp.benchmarks.experiment import (
    ExperimentConfig,
    MethodSpec,
    aggregate_coverage,
    aggregate_scores,
    run_experiment,
)
from calibgp.output import atomic_write, fmt, write_bundle


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--function", default="goldstein_price")
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.2, 0.4])
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--n-test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/delta_sweep"))
    args = ap.parse_args(argv)

    methods = (MethodSpec("gp"),) + tuple(MethodSpec("bcr-gp", delta=d) for d in args.deltas)
    config = ExperimentConfig(functions=(args.function,), n_test=args.n_test, repetitions=args.reps,
                              methods=methods, seed=args.seed)
    records = run_experiment(config)
    write_bundle(records, config, args.out)

    ks = {s.method: s.mean_ks_pit for s in aggregate_scores(records)}
    lines = ["function,delta,level,mean_coverage,mean_rel_width,mean_ks_pit"]
    for row in aggregate_coverage(records):
        if not row.method.startswith("bcr-gp("):
            continue
        delta = float(row.method[len("bcr-gp("):-1])
        lines.append(",".join([row.function, fmt(delta), fmt(row.level), fmt(row.mean_coverage),
                               fmt(row.mean_rel_width), fmt(ks[row.method])]))
    text = "\n".join(lines) + "\n"
    atomic_write(args.out / "delta_sweep.csv", text)
    print(text, end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
