import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from calibgp import gn
from calibgp.gn import GNParams


def test_shape_two_is_normal_with_variance_half_scale_squared():
    z = np.linspace(-8, 8, 401)
    for lam in (0.3, 1.0, 2.5):
        ref = stats.norm.cdf(z, scale=lam / math.sqrt(2))
        assert np.max(np.abs(gn.cdf(z, 2.0, lam) - ref)) <= 1e-10


def test_cdf_at_zero_is_half():
    for beta, lam in [(0.5, 1.0), (1.0, 3.0), (7.0, 0.2)]:
        assert gn.cdf(0.0, beta, lam) == 0.5


def test_laplace_cdf():
    assert gn.gn_cdf(GNParams(1.0, 1.0), 1.0) == pytest.approx(1 - math.exp(-1) / 2, abs=1e-14)
    assert gn.gn_cdf(GNParams(1.0, 1.0), 1.0) == pytest.approx(0.81606, abs=1e-5)


def test_pdf_integrates_to_one_and_matches_cdf_derivative():
    for beta in (0.7, 1.0, 2.0, 4.0):
        total, _ = integrate.quad(lambda t: gn.pdf(t, beta, 1.3), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-8)
        z, h = 0.77, 1e-6
        deriv = (gn.cdf(z + h, beta, 1.3) - gn.cdf(z - h, beta, 1.3)) / (2 * h)
        assert deriv == pytest.approx(gn.pdf(z, beta, 1.3), rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.3, 8.0), st.floats(0.1, 5.0), st.floats(1e-6, 1 - 1e-6))
def test_quantile_inverts_cdf(beta, lam, p):
    assert gn.cdf(gn.quantile(p, beta, lam), beta, lam) == pytest.approx(p, abs=1e-9)


def test_cdf_strictly_increasing_on_grid():
    for beta in (0.5, 2.0, 9.0):
        # stay inside the range where the CDF is not rounded to 0 or 1
        z = np.linspace(gn.quantile(1e-10, beta, 1.0), gn.quantile(1 - 1e-10, beta, 1.0), 1001)
        assert np.all(np.diff(gn.cdf(z, beta, 1.0)) > 0)


def test_quantile_rejects_invalid_probability():
    for p in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            gn.quantile(p, 2.0, 1.0)


def test_params_must_be_positive():
    with pytest.raises(ValueError):
        GNParams(0.0, 1.0)
    with pytest.raises(ValueError):
        GNParams(1.0, -2.0)


def test_variance_closed_forms():
    assert gn.gn_variance(GNParams(2.0, 1.0)) == pytest.approx(0.5, rel=1e-14)
    assert gn.gn_variance(GNParams(1.0, 1.0)) == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("beta", [0.7, 1.0, 2.0, 4.0])
def test_variance_matches_monte_carlo(beta):
    lam = 2.0 if beta == 4.0 else 1.0
    x = gn.gn_sample(GNParams(beta, lam), np.random.default_rng(11), 1_000_000)
    v = gn.gn_variance(GNParams(beta, lam))
    m4 = lam**4 * math.exp(special.gammaln(5 / beta) - special.gammaln(1 / beta))
    se = math.sqrt((m4 - v**2) / x.size)
    assert abs(np.mean(x**2) - v) <= 3 * se


def test_expected_abs_deviation_at_center():
    # lambda Gamma(2/beta) / Gamma(1/beta); beta = 2, lambda = 1 gives 1/sqrt(pi)
    assert gn.expected_abs_deviation(0.0, 2.0, 1.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)
    for beta, lam in [(0.8, 2.0), (3.0, 0.5)]:
        ref = lam * math.gamma(2 / beta) / math.gamma(1 / beta)
        assert gn.expected_abs_deviation(0.0, beta, lam) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("beta,lam,z", [(0.8, 1.0, 0.4), (2.0, 1.5, -2.0), (5.0, 0.7, 1.1)])
def test_expected_abs_deviation_matches_quadrature(beta, lam, z):
    f = lambda y: abs(y - z) * gn.pdf(y, beta, lam)
    ref = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in [(-np.inf, z), (z, np.inf)])
    assert gn.expected_abs_deviation(z, beta, lam) == pytest.approx(ref, rel=1e-8)


def test_dispersion_known_values():
    # Gaussian: E|U - U'| = 2 sd / sqrt(pi) with sd = 1/sqrt(2); Laplace: 3/2
    assert gn.unit_dispersion(2.0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-5)
    assert gn.unit_dispersion(1.0) == pytest.approx(1.5, rel=1e-5)
    assert gn.dispersion(2.0, 3.0) == pytest.approx(3 * math.sqrt(2 / math.pi), rel=1e-5)


@pytest.mark.parametrize("beta", [0.21, 0.37, 0.66, 1.23, 2.9, 6.1, 9.8])
def test_dispersion_table_interpolates_quadrature(beta):
    assert gn.unit_dispersion(beta) == pytest.approx(gn.unit_dispersion_quadrature(beta), rel=5e-5)


def test_dispersion_quadrature_matches_monte_carlo():
    rng = np.random.default_rng(5)
    p = GNParams(1.5, 1.0)
    d = np.abs(gn.gn_sample(p, rng, 1_000_000) - gn.gn_sample(p, rng, 1_000_000))
    assert abs(d.mean() - gn.unit_dispersion_quadrature(1.5)) <= 3 * d.std() / 1000


def test_dispersion_refuses_extrapolation():
    for beta in (0.1, 10.5):
        with pytest.raises(ValueError):
            gn.unit_dispersion(beta)


def _dense_sup(p, q):
    hi = max(gn.gn_quantile(p, 1 - 1e-9), gn.gn_quantile(q, 1 - 1e-9))
    # geometric part resolves the cusp at 0 when a shape is below 1
    z = np.concatenate([np.linspace(0, hi, 10_000), np.geomspace(1e-9, hi, 10_000)])
    return float(np.max(np.abs(gn.gn_cdf(p, z) - gn.gn_cdf(q, z))))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.4, 9.0), st.floats(0.2, 5.0), st.floats(0.4, 9.0), st.floats(0.2, 5.0))
def test_kolmogorov_distance_matches_dense_grid(b1, l1, b2, l2):
    p, q = GNParams(b1, l1), GNParams(b2, l2)
    assert gn.kolmogorov_distance(p, q) == pytest.approx(_dense_sup(p, q), abs=1e-4)


def test_kolmogorov_distance_symmetric_and_zero_on_diagonal():
    p, q = GNParams(1.3, 0.8), GNParams(2.2, 1.1)
    assert gn.kolmogorov_distance(p, p) == 0.0
    assert gn.kolmogorov_distance(p, q) == pytest.approx(gn.kolmogorov_distance(q, p), abs=1e-12)
