"""Quick oracle checks of the closed forms, run by ``calibgp selftest``."""

from __future__ import annotations

import numpy as np
from scipy import special

from . import gn
from .cps import compute_thresholds
from .gp_core import Dataset, KernelParams, build_gp, loo_predictions, matern_correlation
from .metrics import GaussianPredictive, crps, ks_pit


def _gram(x, y, params):
    d = (x[:, None, :] - y[None, :, :]) / params.lengthscales
    return params.variance * matern_correlation(np.sqrt((d**2).sum(-1)), params.regularity)


def _instance(rng, n_max=12):
    """Random GP instance with a well-conditioned augmented Gram matrix."""
    while True:
        d = int(rng.integers(1, 4))
        n = int(rng.integers(4, n_max + 1))
        X = rng.random((n, d))
        x = rng.random(d)
        p = KernelParams(rng.normal(), rng.uniform(0.5, 2), rng.uniform(0.2, 1, d), int(rng.integers(0, 3)))
        Xa = np.vstack([X, x])
        if np.linalg.cond(_gram(Xa, Xa, p)) < 1e6:
            gp = build_gp(Dataset(X, rng.normal(size=n), np.tile([0.0, 1.0], (d, 1))), p)
            return gp, x


def _loo_refit(K, z, mean):
    """Delete-one refits; each sd is the last Cholesky pivot with point i ordered last."""
    n = len(z)
    m, s = np.empty(n), np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        w = np.linalg.solve(K[np.ix_(keep, keep)], K[keep, i])
        m[i] = mean + w @ (z[keep] - mean)
        order = np.append(np.flatnonzero(keep), i)
        s[i] = np.linalg.cholesky(K[np.ix_(order, order)])[-1, -1]
    return m, s


def check_loo(rng) -> float:
    worst = 0.0
    for _ in range(10):
        gp, _ = _instance(rng)
        X, z = gp.dataset.points, gp.dataset.responses
        K = _gram(X, X, gp.params) + gp.nugget * np.eye(gp.n)
        m, s = _loo_refit(K, z, gp.params.mean)
        mc, sc = loo_predictions(gp)
        worst = max(worst, np.max(np.abs(mc - m) / np.maximum(1, np.abs(m))), np.max(np.abs(sc - s) / s))
    return worst


def check_affine(rng) -> float:
    worst = 0.0
    zgrid = np.linspace(-3, 3, 11)
    for _ in range(10):
        gp, x = _instance(rng)
        X, z = gp.dataset.points, gp.dataset.responses
        Xa = np.vstack([X, x])
        K = _gram(Xa, Xa, gp.params) + gp.nugget * np.eye(gp.n + 1)
        ts = compute_thresholds(gp, x)
        if np.any(ts.slopes <= 0):
            return np.inf
        for zz in zgrid:
            za = np.append(z, zz)
            m, s = _loo_refit(K, za, gp.params.mean)
            r = (za - m) / s
            diff = r[-1] - r[:-1]
            pred = ts.slopes[0] * (zz - ts.thresholds[0])
            worst = max(worst, np.max(np.abs(diff - pred) / np.maximum(1, np.abs(diff))))
    return worst


def check_gn() -> float:
    z = np.linspace(-6, 6, 241)
    lam = 1.7
    err = np.max(np.abs(gn.cdf(z, 2.0, lam) - special.ndtr(z / (lam / np.sqrt(2)))))
    err = max(err, abs(gn.variance(2.0, 1.0) - 0.5), abs(gn.variance(1.0, 1.0) - 2.0))
    p = np.linspace(0.01, 0.99, 99)
    for beta in (0.7, 1.0, 2.0, 4.0):
        err = max(err, np.max(np.abs(gn.cdf(gn.quantile(p, beta, 1.3), beta, 1.3) - p)))
    err = max(err, abs(gn.unit_dispersion(2.0) - np.sqrt(2.0 / np.pi)))
    return float(err)


def check_ks(rng) -> float:
    u = rng.random(200)
    s = np.sort(u)
    t = np.unique(np.concatenate([np.linspace(0, 1, 10001), s]))
    right = np.searchsorted(s, t, side="right") / s.size
    left = np.searchsorted(s, t, side="left") / s.size
    scan = max(np.max(np.abs(right - t)), np.max(np.abs(left - t)))
    return abs(ks_pit(u) - scan)


def check_crps() -> float:
    return float(abs(crps(GaussianPredictive([0.0], [1.0]), 0.0)[0] - (np.sqrt(2) - 1) / np.sqrt(np.pi)))


CHECKS = (
    ("leave-one-out closed form vs refits", lambda rng: check_loo(rng), 1e-8),
    ("affine score differences vs augmented refits", lambda rng: check_affine(rng), 1e-8),
    ("generalized normal analytics", lambda rng: check_gn(), 1e-7),
    ("KS-PIT order statistics vs grid scan", lambda rng: check_ks(rng), 1e-12),
    ("normal CRPS closed form", lambda rng: check_crps(), 1e-12),
)


def run_selftest(seed: int = 0, echo=print) -> bool:
    rng = np.random.default_rng(seed)
    ok_all = True
    for name, fn, tol in CHECKS:
        try:
            err = fn(rng)
            ok = bool(err <= tol)
            detail = f"max error {err:.2e} (tolerance {tol:.0e})"
        except Exception as exc:  # noqa: BLE001 - reported as a failure
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all
