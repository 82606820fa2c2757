"""Jackknife+ prediction intervals built from GP leave-one-out quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cps import PredictionInterval
from .gp_core import FittedGP, loo_predictions_at, loo_residuals, predict


@dataclass(frozen=True)
class JackknifeScores:
    """Delete-one means and sds at the test points (n, m) and residual magnitudes (n,)."""

    loo_means: np.ndarray
    loo_sds: np.ndarray
    radii: np.ndarray


def jackknife_scores(gp: FittedGP, x, standardized: bool = True) -> JackknifeScores:
    """LOO ingredients at the rows of ``x``.

    With ``standardized`` the radius of point i at x is ``|R_i| s_{-i}(x)``
    where ``R_i`` is the standardized LOO residual; otherwise it is the raw
    LOO error ``|Z_i - m_{-i}(X_i)|`` and the delete-one sds are set to one.
    """
    means, sds = loo_predictions_at(gp, x)
    r = np.abs(loo_residuals(gp))
    if standardized:
        return JackknifeScores(means, sds, r)
    raw = r / np.sqrt(gp.diag_inv)
    return JackknifeScores(means, np.ones_like(sds), raw)


def jackknife_plus_bounds(scores: JackknifeScores, alpha: float):
    """Order-statistic endpoints; infinite when n is too small for ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    n = scores.radii.size
    half = scores.radii[:, None] * scores.loo_sds
    k_lo = int(math.floor(alpha * (n + 1) + 1e-12))
    k_hi = int(math.ceil((1.0 - alpha) * (n + 1) - 1e-12))
    m = scores.loo_means.shape[1]
    if k_lo < 1:
        lower = np.full(m, -np.inf)
    else:
        lower = np.partition(scores.loo_means - half, k_lo - 1, axis=0)[k_lo - 1]
    if k_hi > n:
        upper = np.full(m, np.inf)
    else:
        upper = np.partition(scores.loo_means + half, k_hi - 1, axis=0)[k_hi - 1]
    return lower, upper


def jackknife_plus_interval(gp: FittedGP, x, alpha: float, standardized: bool = True) -> PredictionInterval:
    """Closed Jackknife+ interval at level ``1 - alpha`` for each row of ``x``.

    ``lower`` is the floor(alpha (n+1))-th smallest of ``m_{-i}(x) - r_i``,
    ``upper`` the ceil((1-alpha)(n+1))-th smallest of ``m_{-i}(x) + r_i``.
    """
    lower, upper = jackknife_plus_bounds(jackknife_scores(gp, x, standardized), alpha)
    return PredictionInterval(lower, upper, 1.0 - alpha, closed_left=True, open_right=False)


class JackknifePlusIntervals:
    """Interval-only predictive used by the benchmark harness.

    Exposes ``interval(level)`` and a GP posterior mean as point prediction;
    distributional metrics do not apply.
    """

    kind = "interval"
    closed_intervals = True

    def __init__(self, gp: FittedGP, x, standardized: bool = True):
        self.scores = jackknife_scores(gp, x, standardized)
        self.center = predict(gp, x).mean

    @property
    def size(self) -> int:
        return self.center.size

    def interval(self, level: float):
        return jackknife_plus_bounds(self.scores, 1.0 - level)

    def median(self):
        return self.center
