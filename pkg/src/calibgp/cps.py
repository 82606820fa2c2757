"""Conformal predictive distributions for GP interpolation.

The conformity score of a candidate label ``z`` at a test point ``x`` is the
standardized residual ``(z - m(x)) / s(x)``.  Augmenting the data with
``(x, z)`` and comparing the test score with the n delete-one scores gives a
difference that is affine in ``z``::

    R_test(z) - R_i(z) = slope_i * (z - threshold_i),    slope_i > 0,

so the randomized rank of the test score is a step function of ``z`` with
jumps at the sorted thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gp_core import FittedGP, predict
from .metrics import PROB_TOL, DiracPredictive, DiscretePredictive, Predictive

# Thresholds closer than TIE_TOL * (1 + |c|) are one tie block.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ThresholdSet:
    """Slopes and thresholds of the affine score differences, shape (m, n)."""

    slopes: np.ndarray
    thresholds: np.ndarray
    test_mean: np.ndarray
    test_sd: np.ndarray

    def __post_init__(self):
        if not np.all(self.slopes > 0):
            raise ValueError("threshold slopes must be strictly positive")
        if not np.all(np.isfinite(self.thresholds)):
            raise ValueError("thresholds must be finite")


def compute_thresholds(gp: FittedGP, x) -> ThresholdSet:
    """Closed-form slopes and thresholds at the rows of ``x``.

    With ``Q`` the inverse Gram matrix, ``a = Q (z - mean)``, ``u = Q k(X, x)``
    and ``v`` the posterior variance at ``x``::

        d_i         = sqrt(v Q_ii + u_i^2)
        threshold_i = m(x) + v a_i / (d_i + u_i)
        slope_i     = (d_i + u_i) / (sqrt(v) d_i)

    ``d_i + u_i`` is evaluated as ``v Q_ii / (d_i - u_i)`` when ``u_i < 0`` to
    avoid cancellation.

    Raises
    ------
    ValueError
        If a row of ``x`` coincides with a design point (zero posterior sd).
    """
    post, u, v, on_design = predict(gp, x, return_solves=True)
    if on_design.any() or np.any(v <= 0):
        raise ValueError("conformal thresholds are undefined at a design point")
    u = u.T  # (m, n)
    vq = v[:, None] * gp.diag_inv[None, :]
    d = np.sqrt(vq + u * u)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.where(u >= 0, d + u, vq / (d - u))
    thresholds = post.mean[:, None] + v[:, None] * gp.alpha[None, :] / denom
    slopes = denom / (np.sqrt(v)[:, None] * d)
    return ThresholdSet(slopes, thresholds, post.mean, np.sqrt(v))


def _snap_ties(c_sorted: np.ndarray) -> np.ndarray:
    """Replace every member of a tie block by the block's smallest value."""
    n = c_sorted.shape[1]
    gap = np.diff(c_sorted, axis=1) > TIE_TOL * (1.0 + np.abs(c_sorted[:, 1:]))
    start = np.concatenate([np.ones((c_sorted.shape[0], 1), bool), gap], axis=1)
    first = np.maximum.accumulate(np.where(start, np.arange(n), 0), axis=1)
    return np.take_along_axis(c_sorted, first, axis=1)


class StepwiseCPD(Predictive):
    """Randomized stepwise predictive CDFs for a batch of test points.

    Between consecutive sorted thresholds ``c_(i) < z < c_(i+1)`` the value is
    ``(i + tau) / (n + 1)``; on a tie block ``c_(i1) = ... = c_(i2) = z`` it is
    ``(i1 - 1 + tau (i2 - i1 + 2)) / (n + 1)``.  Central intervals are
    half-open ``[lo, hi)``.

    Parameters
    ----------
    thresholds : (m, n) array
        Unsorted thresholds; sorted and tie-snapped on construction.
    tau : float or (m,) array in [0, 1]
        Randomization level per test point.
    center : (m,) array, optional
        GP posterior mean at the test points, used as point prediction.
    """

    kind = "stepwise"
    closed_intervals = False

    def __init__(self, thresholds, tau, center=None):
        c = np.atleast_2d(np.asarray(thresholds, dtype=float))
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (c.shape[0],)).copy()
        if np.any((tau < 0) | (tau > 1)):
            raise ValueError("tau must lie in [0, 1]")
        self.sorted_thresholds = _snap_ties(np.sort(c, axis=1))
        self.tau = tau
        self.n = c.shape[1]
        self.center = None if center is None else np.asarray(center, dtype=float)

    @property
    def size(self) -> int:
        return self.sorted_thresholds.shape[0]

    def _counts(self, z):
        z = np.asarray(z, dtype=float)[..., None]
        lt = (self.sorted_thresholds < z).sum(axis=-1)
        le = (self.sorted_thresholds <= z).sum(axis=-1)
        return lt, le

    def cdf(self, z):
        lt, le = self._counts(z)
        return (lt + self.tau * (le - lt + 1)) / (self.n + 1)

    def left_cdf(self, z):
        lt, _ = self._counts(z)
        return (lt + self.tau) / (self.n + 1)

    def right_cdf(self, z):
        _, le = self._counts(z)
        return (le + self.tau) / (self.n + 1)

    def pit_bracket(self, z):
        z = np.asarray(z, dtype=float)
        lo = np.where(z == -np.inf, 0.0, self.left_cdf(z))
        hi = np.where(z == np.inf, 1.0, self.right_cdf(z))
        return lo, hi

    def levels(self):
        """The n + 1 plateau values ``(i + tau) / (n + 1)``, shape (m, n + 1)."""
        return (np.arange(self.n + 1)[None, :] + self.tau[:, None]) / (self.n + 1)

    def quantile(self, p):
        """``inf{z : F(z) >= p}``; ``-inf`` when p <= tau/(n+1), ``+inf`` above the top plateau."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("quantile argument must lie in (0, 1)")
        r = np.ceil((p - PROB_TOL) * (self.n + 1) - self.tau).astype(int)
        r = np.broadcast_to(r, (self.size,))
        idx = np.clip(r - 1, 0, self.n - 1)
        out = self.sorted_thresholds[np.arange(self.size), idx]
        out = np.where(r <= 0, -np.inf, out)
        return np.where(r > self.n, np.inf, out)

    def median(self):
        return self.center if self.center is not None else self.quantile(0.5)

    def sample(self, rng):
        """Draws from the law with masses tau/(n+1) at -inf and (1-tau)/(n+1) at +inf."""
        s = rng.random(self.size) * (self.n + 1) - self.tau
        k = np.floor(s).astype(int)
        out = self.sorted_thresholds[np.arange(self.size), np.clip(k, 0, self.n - 1)]
        out = np.where(s < 0, -np.inf, out)
        return np.where(k >= self.n, np.inf, out)

    def scoring_law(self) -> DiscretePredictive:
        """Finite law for scoring: the tail masses are moved onto the extreme thresholds."""
        w = np.full(self.sorted_thresholds.shape, 1.0 / (self.n + 1))
        w[:, 0] += self.tau / (self.n + 1)
        w[:, -1] += (1.0 - self.tau) / (self.n + 1)
        return DiscretePredictive(self.sorted_thresholds, w)

    def expected_abs_error(self, z):
        return self.scoring_law().expected_abs_error(z)

    def dispersion(self):
        return self.scoring_law().dispersion()


@dataclass(frozen=True)
class PredictionInterval:
    """Interval endpoints per test point; infinite endpoints are legal."""

    lower: np.ndarray
    upper: np.ndarray
    level: float
    closed_left: bool = True
    open_right: bool = True

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        if np.any(np.asarray(self.lower) > np.asarray(self.upper)):
            raise ValueError("lower endpoint exceeds upper endpoint")

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.lower) & np.isfinite(self.upper)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        above = z >= self.lower if self.closed_left else z > self.lower
        below = z < self.upper if self.open_right else z <= self.upper
        return above & below


def cps_predictive(gp: FittedGP, x, tau=0.5, dirac_on_design: bool = False) -> Predictive:
    """Stepwise conformal predictive at the rows of ``x``.

    A single test point on the design yields a Dirac law at the observed value
    when ``dirac_on_design`` is set; otherwise design points raise.
    """
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    if dirac_on_design and x2.shape[0] == 1:
        post = predict(gp, x2)
        if post.sd[0] == 0.0:
            return DiracPredictive(post.mean)
    ts = compute_thresholds(gp, x2)
    return StepwiseCPD(ts.thresholds, tau, center=ts.test_mean)


def cpd_eval(cpd: StepwiseCPD, z):
    return cpd.cdf(z)


def cpd_quantile(cpd: StepwiseCPD, p):
    return cpd.quantile(p)


def interval(cpd: StepwiseCPD, alpha: float) -> PredictionInterval:
    """Central ``1 - alpha`` interval ``[F^-1(alpha/2), F^-1(1 - alpha/2))``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    lo, hi = cpd.interval(1.0 - alpha)
    return PredictionInterval(lo, hi, 1.0 - alpha, closed_left=True, open_right=True)


def cps_pit(gp: FittedGP, x, z, tau):
    """Randomized normalized rank of the test score for label ``z``."""
    return cps_predictive(gp, x, tau).cdf(z)
