import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calibgp.cps import (
    StepwiseCPD,
    compute_thresholds,
    cpd_eval,
    cpd_quantile,
    cps_pit,
    cps_predictive,
    interval,
)
from calibgp.gp_core import Dataset, KernelParams, build_gp
from calibgp.metrics import DiracPredictive

from conftest import random_gp
from oracles import augmented_score_differences

ZGRID = np.linspace(-3, 3, 21)


def _affine_error(gp, x):
    ts = compute_thresholds(gp, x)
    X, z = gp.dataset.points, gp.dataset.responses
    diffs = augmented_score_differences(X, z, gp.params, gp.nugget, x, ZGRID)
    pred = ts.slopes[0][None, :] * (ZGRID[:, None] - ts.thresholds[0][None, :])
    return float(np.max(np.abs(diffs - pred) / np.maximum(1.0, np.abs(diffs)))), ts


def test_affine_differences_match_augmented_refits_1d():
    rng = np.random.default_rng(3)
    X = np.sort(rng.random(6))[:, None]
    gp = build_gp(Dataset(X, np.sin(6 * X[:, 0]), np.array([[0.0, 1.0]])), KernelParams(0.0, 1.0, [0.4], 2))
    err, _ = _affine_error(gp, np.array([0.37]))
    assert err <= 1e-8


def test_affine_differences_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        gp, x = random_gp(rng)
        err, _ = _affine_error(gp, x)
        assert err <= 1e-8


def test_slopes_positive_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(200):
        gp, x = random_gp(rng, n_max=30, cond_max=np.inf)
        ts = compute_thresholds(gp, x)
        assert np.all(ts.slopes > 0) and np.all(np.isfinite(ts.thresholds))


def test_symmetric_two_point_design_gives_equal_thresholds():
    X = np.array([[0.2], [0.8]])
    gp = build_gp(Dataset(X, [1.3, 1.3], np.array([[0.0, 1.0]])), KernelParams(0.4, 1.0, [0.3], 1))
    ts = compute_thresholds(gp, np.array([0.5]))
    assert ts.thresholds[0, 0] == pytest.approx(ts.thresholds[0, 1], abs=1e-12)


def test_thresholds_batch_matches_single_points():
    gp, _ = random_gp(np.random.default_rng(1))
    xs = np.random.default_rng(2).random((5, gp.dataset.dim))
    batch = compute_thresholds(gp, xs)
    for j, x in enumerate(xs):
        one = compute_thresholds(gp, x)
        assert np.allclose(batch.thresholds[j], one.thresholds[0], rtol=1e-13, atol=1e-13)
        assert np.allclose(batch.slopes[j], one.slopes[0], rtol=1e-13)


def test_design_point_raises_or_gives_dirac():
    gp, _ = random_gp(np.random.default_rng(4))
    x = gp.dataset.points[2]
    with pytest.raises(ValueError):
        compute_thresholds(gp, x)
    pred = cps_predictive(gp, x, dirac_on_design=True)
    assert isinstance(pred, DiracPredictive)
    assert pred.value[0] == pytest.approx(gp.dataset.responses[2], abs=1e-8)


C4 = [1.0, 2.0, 3.0, 4.0]


def test_cpd_eval_plateaus():
    assert cpd_eval(StepwiseCPD(C4, 0.0), -10.0)[0] == 0.0
    assert cpd_eval(StepwiseCPD(C4, 1.0), 10.0)[0] == 1.0
    assert cpd_eval(StepwiseCPD(C4, 0.5), 2.5)[0] == pytest.approx(0.5, abs=1e-15)
    cpd = StepwiseCPD(C4, 0.3)
    for i, z in enumerate([0.5, 1.5, 2.5, 3.5, 4.5]):
        assert cpd_eval(cpd, z)[0] == pytest.approx((i + 0.3) / 5, abs=1e-15)


def test_cpd_eval_on_tie_block():
    # block c_(2) = c_(3) = c_(4): i' = 2, i'' = 4
    cpd = StepwiseCPD([1.0, 2.0, 2.0, 2.0, 5.0], 0.25)
    assert cpd_eval(cpd, 2.0)[0] == pytest.approx((2 - 1 + 0.25 * (4 - 2 + 2)) / 6, abs=1e-15)
    # single threshold: i' = i''
    cpd = StepwiseCPD(C4, 0.25)
    assert cpd_eval(cpd, 3.0)[0] == pytest.approx((3 - 1 + 0.25 * 2) / 5, abs=1e-15)


def test_near_ties_are_snapped():
    cpd = StepwiseCPD([1.0, 1.0 + 1e-14, 3.0], 0.5)
    assert cpd.sorted_thresholds[0, 0] == cpd.sorted_thresholds[0, 1]
    assert cpd_eval(cpd, 1.0)[0] == pytest.approx((0 + 0.5 * 3) / 4, abs=1e-15)


def test_cpd_limits():
    cpd = StepwiseCPD(C4, 0.3)
    assert cpd.cdf(-np.inf)[0] == pytest.approx(0.3 / 5)
    assert cpd.cdf(np.inf)[0] == pytest.approx(4.3 / 5)


def test_quantile_examples():
    n, tau = 4, 0.5
    cpd = StepwiseCPD(C4, tau)
    assert cpd_quantile(cpd, tau / (n + 1))[0] == -np.inf
    assert cpd_quantile(cpd, 0.05)[0] == -np.inf
    assert cpd_quantile(cpd, 0.11)[0] == 1.0
    assert cpd_quantile(cpd, (1 + tau) / (n + 1))[0] == 1.0
    assert cpd_quantile(cpd, (1 + tau) / (n + 1) + 1e-9)[0] == 2.0
    assert cpd_quantile(cpd, (n + tau) / (n + 1))[0] == 4.0
    assert cpd_quantile(cpd, 0.95)[0] == np.inf
    for bad in (0.0, 1.0):
        with pytest.raises(ValueError):
            cpd_quantile(cpd, bad)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=12), st.floats(0, 1), st.floats(1e-6, 1 - 1e-6))
def test_quantile_round_trip(c, tau, p):
    """F(q(p)+) >= p and F(q(p)-) <= p; the value at a jump itself depends on tau."""
    cpd = StepwiseCPD(c, tau)
    q = cpd_quantile(cpd, p)[0]
    if np.isfinite(q):
        assert cpd.right_cdf(q)[0] >= p - 1e-12
        assert cpd.left_cdf(q)[0] <= p + 1e-12
    elif q == np.inf:
        assert cpd.cdf(np.inf)[0] < p + 1e-12
    else:
        assert cpd.cdf(-np.inf)[0] >= p - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=10), st.floats(0, 1), st.floats(0, 1),
       st.floats(-6, 6), st.floats(-6, 6))
def test_cpd_monotone_in_z_and_tau(c, t1, t2, z1, z2):
    t1, t2 = sorted((t1, t2))
    z1, z2 = sorted((z1, z2))
    lo = StepwiseCPD(c, t1)
    hi = StepwiseCPD(c, t2)
    assert lo.cdf(z1)[0] <= lo.cdf(z2)[0] + 1e-15
    assert lo.cdf(z1)[0] <= hi.cdf(z1)[0] + 1e-15


def test_interval_examples():
    c19 = np.arange(19.0)
    iv = interval(StepwiseCPD(c19, 0.5), 0.1)
    assert np.isfinite(iv.lower[0]) and np.isfinite(iv.upper[0])
    iv = interval(StepwiseCPD(np.arange(5.0), 0.5), 0.05)
    assert iv.upper[0] == np.inf
    assert iv.closed_left and iv.open_right
    assert not iv.finite[0]


def test_interval_is_half_open():
    cpd = StepwiseCPD(np.arange(19.0), 0.5)
    iv = interval(cpd, 0.1)
    assert iv.contains(iv.lower)[0]
    assert not iv.contains(iv.upper)[0]


def _finite_by_rule(n, tau, alpha):
    # lower endpoint needs alpha/2 > tau/(n+1); upper needs alpha/2 >= (1-tau)/(n+1)
    return alpha > 2 * tau / (n + 1) and alpha >= 2 * (1 - tau) / (n + 1)


def test_interval_finiteness_small_grid():
    for n in (3, 9, 19):
        for tau in (0.1, 0.5, 0.9):
            for alpha in (0.05, 0.1, 0.2, 0.5):
                iv = interval(StepwiseCPD(np.arange(float(n)), tau), alpha)
                assert bool(iv.finite[0]) == _finite_by_rule(n, tau, alpha), (n, tau, alpha)


def test_rank_matches_direct_score_comparison():
    rng = np.random.default_rng(17)
    while True:
        gp, x = random_gp(rng, n_min=7, n_max=7)
        ts = compute_thresholds(gp, x)
        if np.min(np.diff(np.sort(ts.thresholds[0]))) > 1e-3:
            break
    X, z = gp.dataset.points, gp.dataset.responses
    zs = np.linspace(ts.thresholds.min() - 1, ts.thresholds.max() + 1, 41)
    diffs = augmented_score_differences(X, z, gp.params, gp.nugget, x, zs)
    for tau in (0.0, 0.37, 1.0):
        for g, zz in enumerate(zs):
            below = int(np.sum(diffs[g] > 0))   # scores R_i strictly below the test score
            equal = int(np.sum(diffs[g] == 0))
            direct = (below + tau * (equal + 1)) / 8
            assert cps_pit(gp, x, zz, tau)[0] == pytest.approx(direct, abs=1e-14)


def test_pit_extremes():
    gp, x = random_gp(np.random.default_rng(9))
    assert cps_pit(gp, x, -np.inf, 0.0)[0] == 0.0
    assert cps_pit(gp, x, np.inf, 1.0)[0] == 1.0


def test_tau_validation():
    with pytest.raises(ValueError):
        StepwiseCPD(C4, 1.5)


def test_sampling_matches_plateau_masses():
    cpd = StepwiseCPD([[1.0, 2.0, 3.0]] * 20000, 0.4)
    s = cpd.sample(np.random.default_rng(0))
    p = np.array([np.mean(s == v) for v in (-np.inf, 1.0, 2.0, 3.0, np.inf)])
    expect = np.array([0.4, 1, 1, 1, 0.6]) / 4
    assert np.all(np.abs(p - expect) < 4 * np.sqrt(expect * (1 - expect) / s.size))


def test_scoring_law_moves_tail_mass_to_extremes():
    law = StepwiseCPD(C4, 0.3).scoring_law()
    assert np.allclose(law.weights[0], np.array([1.3, 1, 1, 1.7]) / 5)
