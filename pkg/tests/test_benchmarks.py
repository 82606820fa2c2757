import math

import numpy as np
import pytest
from scipy import optimize

from calibgp.benchmarks import functions as tf
from calibgp.benchmarks.experiment import (
    ExperimentConfig,
    MethodSpec,
    aggregate_coverage,
    aggregate_pit_histograms,
    aggregate_scores,
    run_experiment,
    run_repetition,
    stream,
)
from calibgp.benchmarks.functions import eval_function, get_function, sample_design

# Hartmann tables as printed, entered independently of the package module.
A3 = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]]
P3 = [[1, 1, 1], [3, 3, 3], [5, 5, 5], [7, 7, 7]]
A6 = [[10, 3, 17, 3.5, 1.7, 8], [0.05, 10, 17, 0.1, 8, 14],
      [3, 3.5, 1.7, 10, 17, 8], [17, 8, 0.05, 10, 0.1, 14]]
P6 = [[1312, 1696, 5569, 124, 8283, 5886], [2329, 4135, 8307, 3736, 1004, 9991],
      [2348, 1451, 3522, 2883, 3047, 6650], [4047, 8828, 8732, 5743, 1091, 381]]
C = [1.0, 1.2, 3.0, 3.2]


def test_hartmann_constants_digit_for_digit():
    assert np.array_equal(tf.HARTMANN3_A, A3)
    assert np.array_equal(tf.HARTMANN3_P, 0.1 * np.array(P3, dtype=float))
    assert np.array_equal(tf.HARTMANN3_C, C)
    assert np.array_equal(tf.HARTMANN6_A, A6)
    assert np.array_equal(tf.HARTMANN6_P_INT, P6)
    assert np.array_equal(tf.HARTMANN6_C, C)
    # location matrix scaled so the centers lie in the unit cube
    assert np.array_equal(tf.HARTMANN6_P, 1e-4 * np.array(P6, dtype=float))


def test_branin_minimum():
    assert eval_function("branin", [math.pi, 2.275]) == pytest.approx(0.397887, abs=1e-5)
    res = optimize.minimize(lambda x: eval_function("branin", x), [math.pi + 0.1, 2.2], method="Nelder-Mead",
                            options=dict(xatol=1e-10, fatol=1e-12))
    assert res.fun == pytest.approx(0.397887, abs=1e-5)


def test_goldstein_price_minimum():
    assert eval_function("goldstein_price", [0.0, -1.0]) == pytest.approx(3.0, abs=1e-9)


def test_dixon_price_zero():
    assert eval_function("dixon_price2", [1.0, 1 / math.sqrt(2)]) == pytest.approx(0.0, abs=1e-15)


def test_other_known_values():
    assert eval_function("rosenbrock6", np.ones(6)) == 0.0
    assert eval_function("ackley4", np.zeros(4)) == pytest.approx(0.0, abs=1e-14)
    assert eval_function("beale", [3.0, 0.5]) == pytest.approx(0.0, abs=1e-15)
    assert eval_function("hartmann6", [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]) == \
        pytest.approx(-3.32237, abs=1e-5)
    # cos(pi x): at x = 1 in every coordinate the cosine sum is -d
    d = 3
    ref = -20 * math.exp(-0.2) - math.exp(-1) + 20 + math.e
    assert eval_function("ackley3", np.ones(d)) == pytest.approx(ref, abs=1e-13)


def test_function_domains():
    assert np.array_equal(get_function("ackley2").domain, [[-32.168, 32.168]] * 2)
    assert np.array_equal(get_function("branin").domain, [[-5, 10], [0, 15]])
    assert get_function("dixon_price4").dim == 4


def test_function_errors():
    with pytest.raises(KeyError):
        get_function("nonexistent")
    with pytest.raises(ValueError):
        eval_function("goldstein_price", [3.0, 0.0])
    with pytest.raises(ValueError):
        eval_function("branin", [0.0, 1.0, 2.0])


def test_batch_evaluation_matches_single():
    fn = get_function("hartmann3")
    X = sample_design(fn.domain, 7, 0)
    assert np.allclose(fn(X), [fn(x) for x in X], rtol=0, atol=0)


def test_sample_design():
    dom = np.array([[0.0, 1.0], [0.0, 1.0]])
    assert sample_design(dom, 0, 1).shape == (0, 2)
    assert np.array_equal(sample_design(dom, 10, 5), sample_design(dom, 10, 5))
    X = sample_design(dom, 100_000, 3)
    assert np.all(np.abs(X.mean(axis=0) - 0.5) <= 0.005)
    Y = sample_design(np.array([[-2.0, 2.0]]), 1000, 4)
    assert Y.min() >= -2 and Y.max() <= 2


def test_streams_are_independent_and_reproducible():
    a = stream(0, "branin", 3, "design").random(5)
    assert np.array_equal(a, stream(0, "branin", 3, "design").random(5))
    assert not np.array_equal(a, stream(0, "branin", 3, "test").random(5))
    assert not np.array_equal(a, stream(0, "branin", 4, "design").random(5))
    assert not np.array_equal(a, stream(1, "branin", 3, "design").random(5))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(levels=(0.9, 1.2))
    with pytest.raises(KeyError):
        ExperimentConfig(functions=("nope",))
    with pytest.raises(ValueError):
        ExperimentConfig(methods=(MethodSpec("gp"), MethodSpec("gp")))
    with pytest.raises(ValueError):
        MethodSpec("bcr-gp", delta=1.5)
    assert ExperimentConfig.from_dict(ExperimentConfig().to_dict()) == ExperimentConfig()


SMOKE = ExperimentConfig(functions=("branin",), design_multiplier=10, n_test=300, repetitions=2,
                         methods=(MethodSpec("gp"), MethodSpec("cps-gp"), MethodSpec("bcr-gp"),
                                  MethodSpec("bcr-gp", rule="ks-pit"), MethodSpec("j+gp"),
                                  MethodSpec("cps-gp", split=0.5)),
                         mcmc_draws=300, ml_restarts=3, seed=4)


@pytest.fixture(scope="module")
def smoke_records():
    return run_experiment(SMOKE, workers=1)


def test_smoke_run_produces_all_records(smoke_records):
    assert len(smoke_records) == 2 * len(SMOKE.methods)
    assert all(r.error is None for r in smoke_records), [r.error for r in smoke_records if r.error]
    for r in smoke_records:
        assert all(0 <= c <= 1 for c in r.report.coverage)
        assert r.report.iae <= 2 * r.report.ks_pit + 0.01 or r.method == "j+gp"


def test_single_gp_method_smoke_path():
    cfg = ExperimentConfig(functions=("goldstein_price",), design_multiplier=5, n_test=100, repetitions=1,
                           methods=(MethodSpec("gp"),), ml_restarts=2)
    (rec,) = run_experiment(cfg, workers=1)
    assert rec.method == "gp" and rec.error is None and len(rec.report.coverage) == 3


def test_gp_relative_width_is_one(smoke_records):
    for r in smoke_records:
        if r.method == "gp":
            assert r.report.mean_rel_width == (1.0, 1.0, 1.0)
    for row in aggregate_coverage(smoke_records):
        if row.method == "gp":
            assert row.mean_rel_width == 1.0


def test_repetitions_are_reproducible(smoke_records):
    again = run_repetition(SMOKE, "branin", 1)
    first = [r for r in smoke_records if r.repetition == 1]
    for a, b in zip(first, again):
        # repr is exact for floats and, unlike ==, treats the NaN scores of j+gp as equal
        assert a.method == b.method and repr(a.report) == repr(b.report)
        assert a.pit_histogram == b.pit_histogram


def test_parallel_run_matches_serial(smoke_records):
    par = run_experiment(SMOKE, workers=2)
    assert [(r.method, r.repetition, repr(r.report)) for r in par] == \
        [(r.method, r.repetition, repr(r.report)) for r in smoke_records]


def test_aggregates(smoke_records):
    scores = aggregate_scores(smoke_records)
    assert {s.method for s in scores} == {m.label for m in SMOKE.methods}
    assert all(s.n_runs == 2 and s.n_failed == 0 for s in scores)
    hist = aggregate_pit_histograms(smoke_records)
    gp_counts = sum(row[-1] for row in hist if row[1] == "gp")
    assert gp_counts == 2 * SMOKE.n_test


def test_failures_are_recorded_not_raised(monkeypatch):
    from calibgp.benchmarks import experiment

    def boom(*a, **k):
        raise RuntimeError("injected")

    monkeypatch.setattr(experiment, "fit_ml", boom)
    recs = run_repetition(SMOKE, "branin", 0)
    assert len(recs) == len(SMOKE.methods)
    assert all(r.error and "injected" in r.error for r in recs)
