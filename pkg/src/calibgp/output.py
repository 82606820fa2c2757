"""Output bundle of a benchmark run: CSV tables and a JSON summary.

Files (all written atomically):

``runs.csv``
    function, method, repetition, seed, error, then ks_pit, var_pit, iae,
    rmse, crps, scrps and per level ``coverage_<L>``, ``width_<L>``,
    ``rel_width_<L>``, ``infinite_<L>``; last column wall_time.
``coverage.csv``
    function, method, level, mean_coverage, q05, q95, mean_rel_width,
    infinite_count.
``scores.csv``
    function, method, n_runs, n_failed, mean_ks_pit, q05_ks_pit, q95_ks_pit,
    mean_var_pit, mean_iae, mean_rmse, mean_crps, mean_scrps.
``pit_histogram.csv``
    function, method, bin, lower, upper, count (summed over repetitions).
``summary.json``
    resolved config, aggregate rows and failures.
``config.yaml``
    resolved config, loadable by ``calibgp run``.

Numbers use 6 significant digits.  Everything except ``runs.csv`` (which
records wall times) is byte-identical across reruns with the same seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import astuple, fields
from pathlib import Path

from .benchmarks.experiment import (
    CoverageRow,
    ExperimentConfig,
    RunRecord,
    ScoreRow,
    aggregate_coverage,
    aggregate_pit_histograms,
    aggregate_scores,
)
from .config import dump_config

COVERAGE_HEADER = [f.name for f in fields(CoverageRow)]
SCORES_HEADER = [f.name for f in fields(ScoreRow)]
PIT_HEADER = ["function", "method", "bin", "lower", "upper", "count"]
BUNDLE_FILES = ("runs.csv", "coverage.csv", "scores.csv", "pit_histogram.csv", "summary.json", "config.yaml")


def fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".6g")
    return str(x)


def _level_tag(level: float) -> str:
    return format(level, "g")


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def runs_table(records: list[RunRecord], levels) -> tuple[list, list]:
    header = ["function", "method", "repetition", "seed", "error",
              "ks_pit", "var_pit", "iae", "rmse", "crps", "scrps"]
    for l in levels:
        t = _level_tag(l)
        header += [f"coverage_{t}", f"width_{t}", f"rel_width_{t}", f"infinite_{t}"]
    header.append("wall_time")
    rows = []
    for r in records:
        row = [r.function, r.method, r.repetition, r.seed, r.error or ""]
        rep = r.report
        if rep is None:
            row += [float("nan")] * 6 + [float("nan"), float("nan"), float("nan"), 0] * len(levels)
        else:
            row += [rep.ks_pit, rep.var_pit, rep.iae, rep.rmse, rep.crps, rep.scrps]
            for i in range(len(levels)):
                row += [rep.coverage[i], rep.mean_width[i], rep.mean_rel_width[i], rep.infinite_count[i]]
        row.append(round(r.wall_time, 3))
        rows.append(row)
    return header, rows


def _json_safe(x):
    if isinstance(x, float):
        return fmt(x) if not math.isfinite(x) else float(format(x, ".6g"))
    return x


def write_bundle(records: list[RunRecord], config: ExperimentConfig, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cov = aggregate_coverage(records)
    scores = aggregate_scores(records)
    pit = aggregate_pit_histograms(records)
    header, rows = runs_table(records, config.levels)
    texts = {
        "runs.csv": _csv_text(header, rows),
        "coverage.csv": _csv_text(COVERAGE_HEADER, [astuple(r) for r in cov]),
        "scores.csv": _csv_text(SCORES_HEADER, [astuple(r) for r in scores]),
        "pit_histogram.csv": _csv_text(PIT_HEADER, pit),
        "config.yaml": dump_config(config),
    }
    summary = {
        "config": config.to_dict(),
        "coverage": [{k: _json_safe(v) for k, v in zip(COVERAGE_HEADER, astuple(r))} for r in cov],
        "scores": [{k: _json_safe(v) for k, v in zip(SCORES_HEADER, astuple(r))} for r in scores],
        "failures": [
            {"function": r.function, "method": r.method, "repetition": r.repetition, "error": r.error}
            for r in records if r.error
        ],
    }
    texts["summary.json"] = json.dumps(summary, indent=2) + "\n"
    paths = []
    for name in BUNDLE_FILES:
        atomic_write(out / name, texts[name])
        paths.append(out / name)
    return paths


def summary_table(records: list[RunRecord], level: float = 0.9) -> str:
    """Plain-text table of coverage and scores at one level."""
    cov = {(r.function, r.method): r for r in aggregate_coverage(records) if abs(r.level - level) < 1e-12}
    lines = [f"{'function':18s} {'method':18s} {'cov@' + format(level, 'g'):>8s} {'rel.w':>7s} "
             f"{'ks-pit':>7s} {'scrps':>8s} {'fail':>4s}"]
    for s in aggregate_scores(records):
        c = cov.get((s.function, s.method))
        cv = fmt(c.mean_coverage) if c else "-"
        rw = fmt(c.mean_rel_width) if c else "-"
        lines.append(f"{s.function:18s} {s.method:18s} {cv:>8.8s} {rw:>7.7s} "
                     f"{fmt(s.mean_ks_pit):>7.7s} {fmt(s.mean_scrps):>8.8s} {s.n_failed:>4d}")
    return "\n".join(lines)
