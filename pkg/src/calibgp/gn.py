"""Centered generalized normal distribution GN(beta, 0, lambda).

Density  beta / (2 lambda Gamma(1/beta)) * exp(-(|z|/lambda)^beta).
The CDF uses the regularized lower incomplete gamma function of
(|z|/lambda)^beta; sampling uses the gamma transform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class GNParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"GN parameters must be positive, got {self}")


def _args(shape, scale):
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(shape <= 0) or np.any(scale <= 0):
        raise ValueError("GN shape and scale must be positive")
    return shape, scale


def pdf(z, shape, scale):
    shape, scale = _args(shape, scale)
    t = np.abs(np.asarray(z, dtype=float)) / scale
    logc = np.log(shape) - np.log(2.0 * scale) - special.gammaln(1.0 / shape)
    return np.exp(logc - t**shape)


def cdf(z, shape, scale):
    shape, scale = _args(shape, scale)
    z = np.asarray(z, dtype=float)
    t = (np.abs(z) / scale) ** shape
    half = 0.5 * special.gammainc(1.0 / shape, t)
    return np.where(z >= 0, 0.5 + half, 0.5 - half)


def sf(z, shape, scale):
    """Survival function, accurate in the right tail."""
    return cdf(-np.asarray(z, dtype=float), shape, scale)


def quantile(p, shape, scale):
    shape, scale = _args(shape, scale)
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("quantile argument must lie in (0, 1)")
    q = np.abs(2.0 * p - 1.0)
    t = special.gammaincinv(1.0 / shape, q)
    return np.sign(p - 0.5) * scale * t ** (1.0 / shape)


def sample(params: GNParams, rng, size=None):
    g = rng.gamma(1.0 / params.shape, 1.0, size=size)
    sign = np.where(rng.random(size=size) < 0.5, -1.0, 1.0)
    return sign * params.scale * g ** (1.0 / params.shape)


def variance(shape, scale):
    """lambda^2 Gamma(3/beta) / Gamma(1/beta)."""
    shape, scale = _args(shape, scale)
    return scale**2 * np.exp(special.gammaln(3.0 / shape) - special.gammaln(1.0 / shape))


def gn_pdf(params: GNParams, z):
    return pdf(z, params.shape, params.scale)


def gn_cdf(params: GNParams, z):
    return cdf(z, params.shape, params.scale)


def gn_quantile(params: GNParams, p):
    return quantile(p, params.shape, params.scale)


def gn_sample(params: GNParams, rng, size=None):
    return sample(params, rng, size)


def gn_variance(params: GNParams) -> float:
    return float(variance(params.shape, params.scale))


def expected_abs_deviation(z, shape, scale):
    """E|Z - z| for Z ~ GN(shape, 0, scale).

    lambda [u (2F(u) - 1) + Gamma(2/beta, |u|^beta) / Gamma(1/beta)],  u = z/lambda,
    with Gamma(., .) the (non-regularized) upper incomplete gamma function.
    """
    shape, scale = _args(shape, scale)
    u = np.asarray(z, dtype=float) / scale
    F = cdf(u, shape, 1.0)
    upper = special.gammaincc(2.0 / shape, np.abs(u) ** shape) * np.exp(
        special.gammaln(2.0 / shape) - special.gammaln(1.0 / shape)
    )
    return scale * (u * (2.0 * F - 1.0) + upper)


# Self-dispersion E|U - U'| for U, U' ~ GN(beta, 0, 1), tabulated offline by
# scripts/build_gn_dispersion_table.py and interpolated in log(beta).
DISPERSION_BETA_MIN = 0.2
DISPERSION_BETA_MAX = 10.0


@lru_cache(maxsize=1)
def _dispersion_interpolant():
    with resources.files("calibgp").joinpath("data/gn_dispersion.csv").open() as fh:
        rows = [(float(r["beta"]), float(r["mean_abs_diff"])) for r in csv.DictReader(fh)]
    beta, val = np.array(rows).T
    # log-log space: the value spans five decades over the beta range.  The
    # curve is not monotone (it dips below its large-shape limit 2/3), so a
    # smooth spline is used rather than a shape-preserving one.
    return CubicSpline(np.log(beta), np.log(val))


def unit_dispersion(shape):
    """E|U - U'| for the unit-scale law, interpolated from the precomputed table."""
    shape = np.asarray(shape, dtype=float)
    tol = 1e-12
    if np.any(shape < DISPERSION_BETA_MIN * (1 - tol)) or np.any(shape > DISPERSION_BETA_MAX * (1 + tol)):
        raise ValueError(
            f"shape outside the tabulated range [{DISPERSION_BETA_MIN}, {DISPERSION_BETA_MAX}]"
        )
    clipped = np.clip(shape, DISPERSION_BETA_MIN, DISPERSION_BETA_MAX)
    return np.exp(_dispersion_interpolant()(np.log(clipped)))


def dispersion(shape, scale):
    """E|Z - Z'| = lambda E|U - U'|."""
    shape, scale = _args(shape, scale)
    return scale * unit_dispersion(shape)


def unit_dispersion_quadrature(shape: float) -> float:
    """Reference value of E|U - U'| by adaptive quadrature.

    The inner expectation E|U - u| is closed form.  The outer one runs over
    u >= 0 (symmetry) after the substitution t = u^beta, which turns the
    density into a Gamma(1/beta, 1) density in t.
    """
    from scipy import integrate

    a = 1.0 / shape
    logc = -special.gammaln(a)

    def smooth_part(t):
        return float(expected_abs_deviation(t**a, shape, 1.0)) * np.exp(logc - t)

    opts = dict(limit=500, epsabs=1e-13, epsrel=1e-12)
    # t^(a - 1) is integrable but singular at 0 when the shape exceeds 1
    head, _ = integrate.quad(smooth_part, 0.0, 1.0, weight="alg", wvar=(a - 1.0, 0.0), **opts)
    tail, _ = integrate.quad(lambda t: smooth_part(t) * t ** (a - 1.0), 1.0, np.inf, **opts)
    return head + tail


def kolmogorov_distance(p: GNParams, q: GNParams, grid_size: int = 512, refine_steps: int = 40) -> float:
    """sup_z |F_p(z) - F_q(z)| between two centered GN laws.

    Both CDFs equal 1/2 at 0, so the sup is searched over z >= 0 on a grid
    covering both [0.5, 1 - 1e-6] quantile ranges; the best cell is refined by
    bisection on the sign of the derivative of |F_p - F_q|.
    """
    upper = max(float(quantile(1 - 1e-6, p.shape, p.scale)), float(quantile(1 - 1e-6, q.shape, q.scale)))
    z = np.linspace(0.0, upper, grid_size)
    diff = cdf(z, p.shape, p.scale) - cdf(z, q.shape, q.scale)
    k = int(np.argmax(np.abs(diff)))
    best = abs(float(diff[k]))
    if best == 0.0:
        return 0.0
    sgn = np.sign(diff[k])
    a, b = z[max(k - 1, 0)], z[min(k + 1, grid_size - 1)]

    def slope(t):
        return sgn * (pdf(t, p.shape, p.scale) - pdf(t, q.shape, q.scale))

    if slope(a) > 0 and slope(b) < 0:
        for _ in range(refine_steps):
            mid = 0.5 * (a + b)
            if slope(mid) > 0:
                a = mid
            else:
                b = mid
        t = 0.5 * (a + b)
        best = max(best, abs(float(cdf(t, p.shape, p.scale) - cdf(t, q.shape, q.scale))))
    return best
