"""Calibrated residual laws for GP predictions.

Standardized leave-one-out residuals are modeled as i.i.d. centered
generalized normal GN(shape, 0, scale).  A random-walk Metropolis chain gives
posterior draws of (shape, scale) under uniform box priors; one draw is then
selected either by a posterior-variance quantile (conservative rule) or by
minimizing a quantile of cross-posterior Kolmogorov distances (calibration
rule).  The predictive law is ``m(x) + s(x) * GN(shape, 0, scale)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import gn
from .gn import GNParams
from .gp_core import FittedGP, predict
from .metrics import GNLaw, LocationScalePredictive


@dataclass(frozen=True)
class MCMCConfig:
    burn_in: int = 2000
    thin: int = 2
    target_acceptance: float = 0.3
    adapt_start: int = 200


@dataclass(frozen=True, eq=False)
class GNPosterior:
    """Retained posterior draws of (shape, scale)."""

    shapes: np.ndarray
    scales: np.ndarray
    prior_bounds: tuple
    acceptance_rate: float
    seed: object = None

    def __post_init__(self):
        a, b = self.prior_bounds
        if self.shapes.shape != self.scales.shape or self.shapes.ndim != 1:
            raise ValueError("shapes and scales must be 1-D arrays of equal length")
        if np.any((self.shapes <= 0) | (self.shapes >= a)) or np.any((self.scales <= 0) | (self.scales >= b)):
            raise ValueError("posterior draws must lie inside the prior box")

    @property
    def size(self) -> int:
        return self.shapes.size

    @property
    def draws(self) -> list[GNParams]:
        return [GNParams(float(s), float(l)) for s, l in zip(self.shapes, self.scales)]

    def variances(self) -> np.ndarray:
        return gn.variance(self.shapes, self.scales)

    def draw(self, j: int) -> GNParams:
        return GNParams(float(self.shapes[j]), float(self.scales[j]))


def gn_loglik(residuals, shape: float, scale: float) -> float:
    r = np.abs(residuals)
    n = r.size
    return float(
        n * (math.log(shape) - math.log(2.0 * scale) - special.gammaln(1.0 / shape))
        - np.sum((r / scale) ** shape)
    )


def posterior_sample(residuals, bounds=(10.0, 10.0), K: int = 3000, seed=None,
                     config: MCMCConfig = MCMCConfig()) -> GNPosterior:
    """Adaptive random-walk Metropolis on (log shape, log scale).

    The target is the GN likelihood of the residuals times the uniform prior
    on ``(0, a) x (0, b)``, written in log coordinates with the Jacobian
    ``shape * scale``.  During burn-in the proposal covariance follows the
    running chain covariance and its global scale is tuned toward the target
    acceptance rate; both are frozen afterward.  Deterministic given ``seed``.

    Raises
    ------
    ValueError
        Fewer than 5 residuals, non-positive bounds, or all residuals zero.
    """
    r = np.asarray(residuals, dtype=float).ravel()
    a, b = float(bounds[0]), float(bounds[1])
    if r.size < 5:
        raise ValueError("need at least 5 residuals")
    if not (a > 0 and b > 0):
        raise ValueError("prior bounds must be positive")
    if K < 1:
        raise ValueError("K must be positive")
    ms = float(np.mean(r * r))
    if ms == 0.0:
        raise ValueError("all residuals are zero; the GN likelihood is degenerate")
    rng = np.random.default_rng(seed)

    def logpost(phi):
        shape, scale = math.exp(phi[0]), math.exp(phi[1])
        if not (shape < a and scale < b):
            return -np.inf
        return gn_loglik(r, shape, scale) + phi[0] + phi[1]

    phi = np.array([math.log(min(2.0, 0.9 * a)), math.log(min(math.sqrt(2.0 * ms), 0.9 * b))])
    lp = logpost(phi)
    log_step = math.log(2.38 / math.sqrt(2.0))
    cov = np.diag([0.1**2, 0.1**2])
    chol = np.linalg.cholesky(cov)
    mean_run = phi.copy()
    m2_run = np.zeros((2, 2))
    n_iter = config.burn_in + K * config.thin
    out = np.empty((K, 2))
    accepted = 0
    for t in range(n_iter):
        prop = phi + math.exp(log_step) * (chol @ rng.standard_normal(2))
        lp_prop = logpost(prop)
        acc = lp_prop - lp >= 0 or math.log(rng.random()) < lp_prop - lp
        if acc:
            phi, lp = prop, lp_prop
        if t < config.burn_in:
            # Welford update of the chain covariance, then Robbins-Monro on the step
            k = t + 1
            delta = phi - mean_run
            mean_run = mean_run + delta / (k + 1)
            m2_run = m2_run + np.outer(delta, phi - mean_run)
            log_step += ((1.0 if acc else 0.0) - config.target_acceptance) / math.sqrt(k)
            if k >= config.adapt_start and k % 50 == 0:
                emp = m2_run / k + 1e-8 * np.eye(2)
                chol = np.linalg.cholesky(emp)
        else:
            accepted += acc
            s = t - config.burn_in
            if (s + 1) % config.thin == 0:
                out[s // config.thin] = phi
    draws = np.exp(out)
    return GNPosterior(draws[:, 0], draws[:, 1], (a, b), accepted / (K * config.thin), seed)


def _lower_quantile(sorted_values: np.ndarray, q: float) -> float:
    """Order statistic at 1-based index ceil(q K)."""
    k = max(int(math.ceil(q * sorted_values.size - 1e-12)), 1)
    return float(sorted_values[k - 1])


def rule1_index(post: GNPosterior, delta: float) -> int:
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    v = post.variances()
    target = _lower_quantile(np.sort(v), 1.0 - delta)
    return int(np.argmin(np.abs(v - target)))


def select_rule1(post: GNPosterior, delta: float) -> GNParams:
    """Draw whose variance is nearest the (1 - delta) posterior variance quantile."""
    return post.draw(rule1_index(post, delta))


def _cdf_table(post: GNPosterior, grid_size: int):
    """CDFs of all draws on a shared log-spaced grid of z > 0."""
    lo = np.min(gn.quantile(0.5 + 1e-5, post.shapes, post.scales))
    hi = np.max(gn.quantile(1.0 - 1e-6, post.shapes, post.scales))
    z = np.geomspace(lo, hi, grid_size) if hi > lo else np.array([lo])
    F = gn.cdf(z[None, :], post.shapes[:, None], post.scales[:, None])
    return z, F


def _sup_abs_diff(Fa: np.ndarray, Fb: np.ndarray) -> np.ndarray:
    """Grid maximum of |Fa - Fb| along the last axis with a parabolic vertex refinement."""
    d = np.abs(Fa - Fb)
    G = d.shape[-1]
    k = np.argmax(d, axis=-1)
    best = np.take_along_axis(d, k[..., None], axis=-1)[..., 0]
    if G < 3:
        return best
    kc = np.clip(k, 1, G - 2)
    y0 = np.take_along_axis(d, (kc - 1)[..., None], axis=-1)[..., 0]
    y1 = np.take_along_axis(d, kc[..., None], axis=-1)[..., 0]
    y2 = np.take_along_axis(d, (kc + 1)[..., None], axis=-1)[..., 0]
    curv = y0 - 2.0 * y1 + y2
    interior = (k == kc) & (curv < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = y1 - (y0 - y2) ** 2 / (8.0 * curv)
    # the vertex correction is second order; cap it so a kink cannot inflate it
    vertex = np.minimum(vertex, y1 + 0.5 * np.abs(y0 - y2))
    return np.where(interior, np.maximum(best, vertex), best)


def pairwise_kolmogorov(post: GNPosterior, grid_size: int = 256) -> np.ndarray:
    """Full K x K matrix of Kolmogorov distances between the draws' CDFs."""
    _, F = _cdf_table(post, grid_size)
    K = post.size
    D = np.empty((K, K))
    for j in range(K):
        D[j] = _sup_abs_diff(F, F[j][None, :])
    return D


def rule2_scores(post: GNPosterior, delta: float, seed=None, max_pairs: int = 500,
                 grid_size: int = 256, chunk: int = 16) -> np.ndarray:
    """T_j = lower (1 - delta) quantile of {D(j, i) : i != j} for every draw j.

    For more than ``max_pairs + 1`` draws, each j uses a seeded random subset of
    ``max_pairs`` partners.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    K = post.size
    if K < 2:
        raise ValueError("need at least 2 draws")
    _, F = _cdf_table(post, grid_size)
    if K - 1 > max_pairs:
        rng = np.random.default_rng(seed)
        partners = np.empty((K, max_pairs), dtype=int)
        for j in range(K):
            pick = rng.choice(K - 1, size=max_pairs, replace=False)
            partners[j] = pick + (pick >= j)
    else:
        others = np.arange(K)
        partners = np.array([np.delete(others, j) for j in range(K)])
    M = partners.shape[1]
    kq = max(int(math.ceil((1.0 - delta) * M - 1e-12)), 1)
    T = np.empty(K)
    for start in range(0, K, chunk):
        js = np.arange(start, min(start + chunk, K))
        D = _sup_abs_diff(F[partners[js]], F[js][:, None, :])
        D.sort(axis=1)
        T[js] = D[:, kq - 1]
    return T


def rule2_index(post: GNPosterior, delta: float, seed=None, **kw) -> int:
    return int(np.argmin(rule2_scores(post, delta, seed=seed, **kw)))


def select_rule2(post: GNPosterior, delta: float, seed=None, **kw) -> GNParams:
    """Draw minimizing the (1 - delta) quantile of its Kolmogorov distances to the others."""
    return post.draw(rule2_index(post, delta, seed=seed, **kw))


class BcrPredictive(LocationScalePredictive):
    """Laws ``mean + sd * GN(shape, 0, scale)`` with one selected (shape, scale)."""

    def __init__(self, mean, sd, theta: GNParams):
        super().__init__(mean, sd, GNLaw(theta.shape, theta.scale))
        self.theta = theta

    def pdf(self, z):
        u = (np.asarray(z, dtype=float) - self.mean) / self.sd
        return gn.pdf(u, self.theta.shape, self.theta.scale) / self.sd


def bcr_predictive(gp: FittedGP, x, theta_star: GNParams) -> BcrPredictive:
    post = predict(gp, x)
    return BcrPredictive(post.mean, post.sd, theta_star)
