"""Repeated benchmark runs: design, GP fit, predictive methods and metrics.

Every random quantity of a run draws from its own stream keyed by
(master seed, function, repetition, role), so adding or removing a method
never changes the draws seen by the others.
"""

from __future__ import annotations

import os
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .. import bcr
from ..baselines import JackknifePlusIntervals
from ..cps import StepwiseCPD, compute_thresholds
from ..gp_core import ConvergenceWarning, Dataset, build_gp, fit_ml, loo_residuals, predict
from ..metrics import GaussianPredictive, MetricsReport, coverage_and_width, evaluate, pit_values
from .functions import get_function, sample_design

METHOD_KINDS = ("gp", "cps-gp", "bcr-gp", "j+gp")
BCR_RULES = ("variance", "ks-pit")
PIT_BINS = 20
WORKERS_ENV = "CALIBGP_WORKERS"


@dataclass(frozen=True)
class MethodSpec:
    """One predictive method and its options.

    ``delta`` is the tolerance of either selection rule; ``split`` is the
    fraction of the design used for hyperparameter selection (conformal
    method only), the rest serving as calibration data.
    """

    kind: str
    rule: str = "variance"
    delta: float = 0.1
    tau_mode: str = "random"
    tau: float = 0.5
    split: float | None = None
    standardized: bool = True

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown method {self.kind!r}; expected one of {METHOD_KINDS}")
        if self.rule not in BCR_RULES:
            raise ValueError(f"unknown selection rule {self.rule!r}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.tau_mode not in ("random", "fixed") or not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau_mode must be 'random' or 'fixed' with tau in [0, 1]")
        if self.split is not None and not 0.0 < self.split < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")

    @property
    def label(self) -> str:
        if self.kind == "bcr-gp":
            return "bcr-gp(ks-pit)" if self.rule == "ks-pit" else f"bcr-gp({self.delta:g})"
        if self.kind == "cps-gp" and self.split is not None:
            return f"cps-gp(split={self.split:g})"
        if self.kind == "j+gp" and not self.standardized:
            return "j+gp(raw)"
        return self.kind


DEFAULT_METHODS = (
    MethodSpec("gp"),
    MethodSpec("cps-gp"),
    MethodSpec("bcr-gp", rule="variance", delta=0.1),
    MethodSpec("bcr-gp", rule="variance", delta=0.01),
    MethodSpec("bcr-gp", rule="ks-pit", delta=0.1),
    MethodSpec("j+gp"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    functions: tuple = ("goldstein_price",)
    design_multiplier: int = 20
    n_test: int = 2000
    repetitions: int = 20
    regularity: int = 2
    methods: tuple = DEFAULT_METHODS
    levels: tuple = (0.7, 0.9, 0.95)
    seed: int = 0
    mcmc_draws: int = 3000
    prior_bounds: tuple = (10.0, 10.0)
    ml_restarts: int = 8
    rule2_pairs: int = 500

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        object.__setattr__(self, "levels", tuple(float(l) for l in self.levels))
        object.__setattr__(self, "prior_bounds", tuple(float(b) for b in self.prior_bounds))
        methods = tuple(m if isinstance(m, MethodSpec) else MethodSpec(**m) for m in self.methods)
        object.__setattr__(self, "methods", methods)
        if not self.functions:
            raise ValueError("at least one function is required")
        for name in self.functions:
            get_function(name)
        if self.n_test < 1 or self.repetitions < 1 or self.design_multiplier < 1:
            raise ValueError("n_test, repetitions and design_multiplier must be positive")
        if any(not 0.0 < l < 1.0 for l in self.levels):
            raise ValueError("levels must lie in (0, 1)")
        if not self.methods:
            raise ValueError("at least one method is required")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate method labels {labels}")
        if self.mcmc_draws < 2:
            raise ValueError("mcmc_draws must be at least 2")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["functions"] = list(self.functions)
        d["levels"] = list(self.levels)
        d["prior_bounds"] = list(self.prior_bounds)
        d["methods"] = [asdict(m) for m in self.methods]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**data)


@dataclass(frozen=True)
class RunRecord:
    function: str
    method: str
    repetition: int
    seed: int
    report: MetricsReport | None
    pit_histogram: tuple = ()
    wall_time: float = 0.0
    error: str | None = None


def stream(master: int, function: str, repetition: int, role: str) -> np.random.Generator:
    """Independent generator for one (function, repetition, role)."""
    key = (zlib.crc32(function.encode()), int(repetition), zlib.crc32(role.encode()))
    return np.random.default_rng(np.random.SeedSequence(int(master), spawn_key=key))


def _pit_hist(u) -> tuple:
    counts, _ = np.histogram(u, bins=PIT_BINS, range=(0.0, 1.0))
    return tuple(int(c) for c in counts)


def _interval_only_report(pred, truths, levels, reference_widths) -> MetricsReport:
    cover = coverage_and_width(pred, truths, levels)
    rel = []
    for c in cover:
        ratio = c.widths / reference_widths[c.level]
        ok = np.isfinite(ratio)
        rel.append(float(np.mean(ratio[ok])) if ok.any() else float("inf"))
    nan = float("nan")
    return MetricsReport(
        levels=tuple(levels),
        coverage=tuple(c.coverage for c in cover),
        mean_width=tuple(c.mean_width for c in cover),
        infinite_count=tuple(c.infinite_count for c in cover),
        mean_rel_width=tuple(rel),
        ks_pit=nan, var_pit=nan, iae=nan,
        rmse=float(np.sqrt(np.mean((pred.median() - truths) ** 2))),
        crps=nan, scrps=nan,
    )


class _RepetitionContext:
    """Shared fitted objects of one repetition, built lazily."""

    def __init__(self, config: ExperimentConfig, function: str, rep: int):
        self.config = config
        self.function = function
        self.rep = rep
        fn = get_function(function)
        self.fn = fn
        n = config.design_multiplier * fn.dim
        X = sample_design(fn.domain, n, self.stream("design"))
        self.dataset = Dataset(X, fn(X), fn.domain)
        self.x_test = sample_design(fn.domain, config.n_test, self.stream("test"))
        self.z_test = fn(self.x_test)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            params = fit_ml(self.dataset, config.regularity, seed=self.stream("ml"),
                            restarts=config.ml_restarts)
        self.gp = build_gp(self.dataset, params)
        self.post = predict(self.gp, self.x_test)
        self._posterior = None
        self._rule2 = {}

    def stream(self, role: str) -> np.random.Generator:
        return stream(self.config.seed, self.function, self.rep, role)

    def gn_posterior(self) -> bcr.GNPosterior:
        if self._posterior is None:
            self._posterior = bcr.posterior_sample(
                loo_residuals(self.gp), self.config.prior_bounds, self.config.mcmc_draws,
                seed=self.stream("mcmc"),
            )
        return self._posterior

    def rule2_index(self, delta: float) -> int:
        if delta not in self._rule2:
            self._rule2[delta] = bcr.rule2_index(
                self.gn_posterior(), delta, seed=self.stream("rule2"),
                max_pairs=self.config.rule2_pairs,
            )
        return self._rule2[delta]

    def split_gp(self, gamma: float):
        n = self.dataset.n
        perm = self.stream(f"split:{gamma:g}").permutation(n)
        k = int(round(gamma * n))
        if k < 2 or n - k < 3:
            raise ValueError(f"split {gamma} leaves too few points on one side (n={n})")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            params = fit_ml(self.dataset.subset(np.sort(perm[:k])), self.config.regularity,
                            seed=self.stream(f"split-ml:{gamma:g}"), restarts=self.config.ml_restarts)
        return build_gp(self.dataset.subset(np.sort(perm[k:])), params)

    def predictive(self, spec: MethodSpec):
        if spec.kind == "gp":
            return GaussianPredictive(self.post.mean, self.post.sd)
        if spec.kind == "cps-gp":
            gp = self.gp if spec.split is None else self.split_gp(spec.split)
            ts = compute_thresholds(gp, self.x_test)
            if spec.tau_mode == "fixed":
                tau = spec.tau
            else:
                tau = self.stream(f"tau:{spec.label}").random(self.x_test.shape[0])
            return StepwiseCPD(ts.thresholds, tau, center=ts.test_mean)
        if spec.kind == "bcr-gp":
            post = self.gn_posterior()
            if spec.rule == "variance":
                j = bcr.rule1_index(post, spec.delta)
            else:
                j = self.rule2_index(spec.delta)
            return bcr.BcrPredictive(self.post.mean, self.post.sd, post.draw(j))
        return JackknifePlusIntervals(self.gp, self.x_test, standardized=spec.standardized)


def run_repetition(config: ExperimentConfig, function: str, rep: int) -> list[RunRecord]:
    """All methods on one (function, repetition); failures become records with ``error`` set."""
    try:
        ctx = _RepetitionContext(config, function, rep)
    except Exception as exc:  # noqa: BLE001 - recorded, the sweep continues
        return [RunRecord(function, m.label, rep, config.seed, None, error=f"{type(exc).__name__}: {exc}")
                for m in config.methods]
    gp_pred = GaussianPredictive(ctx.post.mean, ctx.post.sd)
    _, ref_widths = evaluate(gp_pred, ctx.z_test, config.levels, point_estimate=ctx.post.mean,
                             seed=ctx.stream("pit:gp"))
    records = []
    for spec in config.methods:
        t0 = time.perf_counter()
        try:
            pred = ctx.predictive(spec)
            if spec.kind == "j+gp":
                report = _interval_only_report(pred, ctx.z_test, config.levels, ref_widths)
                hist = ()
            else:
                tau = pred.tau if isinstance(pred, StepwiseCPD) else None
                report, _ = evaluate(pred, ctx.z_test, config.levels, point_estimate=ctx.post.mean,
                                     seed=ctx.stream(f"pit:{spec.label}"), tau=tau,
                                     reference_widths=ref_widths)
                pit = pit_values(pred, ctx.z_test, seed=ctx.stream(f"pit:{spec.label}"), tau=tau)
                hist = _pit_hist(pit.values)
            records.append(RunRecord(function, spec.label, rep, config.seed, report, hist,
                                     time.perf_counter() - t0))
        except Exception as exc:  # noqa: BLE001 - recorded, the sweep continues
            records.append(RunRecord(function, spec.label, rep, config.seed, None,
                                     wall_time=time.perf_counter() - t0,
                                     error=f"{type(exc).__name__}: {exc}"))
    return records


def _task(args):
    return run_repetition(*args)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def run_experiment(config: ExperimentConfig, workers: int | None = None, progress=None) -> list[RunRecord]:
    """Run every (function, repetition) and return the records in task order."""
    tasks = [(config, f, r) for f in config.functions for r in range(config.repetitions)]
    workers = worker_count() if workers is None else workers
    out: list[RunRecord] = []
    if workers <= 1:
        for i, t in enumerate(tasks):
            out.extend(_task(t))
            if progress:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, recs in enumerate(pool.map(_task, tasks)):
                out.extend(recs)
                if progress:
                    progress(i + 1, len(tasks))
    return out


# ------------------------------------------------------------------ aggregation


@dataclass(frozen=True)
class CoverageRow:
    function: str
    method: str
    level: float
    mean_coverage: float
    q05: float
    q95: float
    mean_rel_width: float
    infinite_count: int


@dataclass(frozen=True)
class ScoreRow:
    function: str
    method: str
    n_runs: int
    n_failed: int
    mean_ks_pit: float
    q05_ks_pit: float
    q95_ks_pit: float
    mean_var_pit: float
    mean_iae: float
    mean_rmse: float
    mean_crps: float
    mean_scrps: float


def _groups(records):
    keys = []
    groups = {}
    for r in records:
        k = (r.function, r.method)
        if k not in groups:
            keys.append(k)
            groups[k] = []
        groups[k].append(r)
    return keys, groups


def _finite_mean(values) -> float:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    return float(np.mean(v)) if v.size else float("nan")


def aggregate_coverage(records) -> list[CoverageRow]:
    keys, groups = _groups(records)
    rows = []
    for f, m in keys:
        ok = [r.report for r in groups[(f, m)] if r.report is not None]
        if not ok:
            continue
        for i, level in enumerate(ok[0].levels):
            cov = np.array([rep.coverage[i] for rep in ok])
            rows.append(CoverageRow(
                f, m, level, float(np.mean(cov)),
                float(np.quantile(cov, 0.05)), float(np.quantile(cov, 0.95)),
                _finite_mean([rep.mean_rel_width[i] for rep in ok]),
                int(sum(rep.infinite_count[i] for rep in ok)),
            ))
    return rows


def aggregate_scores(records) -> list[ScoreRow]:
    keys, groups = _groups(records)
    rows = []
    for f, m in keys:
        recs = groups[(f, m)]
        ok = [r.report for r in recs if r.report is not None]
        ks = np.array([rep.ks_pit for rep in ok]) if ok else np.array([np.nan])
        finite = ks[np.isfinite(ks)]
        rows.append(ScoreRow(
            f, m, len(ok), len(recs) - len(ok),
            _finite_mean(ks),
            float(np.quantile(finite, 0.05)) if finite.size else float("nan"),
            float(np.quantile(finite, 0.95)) if finite.size else float("nan"),
            _finite_mean([rep.var_pit for rep in ok]),
            _finite_mean([rep.iae for rep in ok]),
            _finite_mean([rep.rmse for rep in ok]),
            _finite_mean([rep.crps for rep in ok]),
            _finite_mean([rep.scrps for rep in ok]),
        ))
    return rows


def aggregate_pit_histograms(records) -> list[tuple]:
    """Summed PIT histogram counts per (function, method): rows (function, method, bin, lo, hi, count)."""
    keys, groups = _groups(records)
    rows = []
    for f, m in keys:
        hists = [r.pit_histogram for r in groups[(f, m)] if r.pit_histogram]
        if not hists:
            continue
        total = np.sum(np.array(hists), axis=0)
        for b, c in enumerate(total):
            rows.append((f, m, b, b / PIT_BINS, (b + 1) / PIT_BINS, int(c)))
    return rows
