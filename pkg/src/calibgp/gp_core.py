"""Gaussian-process interpolation engine.

Constant-mean GP with an anisotropic half-integer Matérn kernel, maximum
likelihood selection of the hyperparameters, posterior prediction and
closed-form leave-one-out quantities.

The Gram matrix carries a small relative nugget ``eps * sigma^2`` on its
diagonal.  It is treated as part of the kernel at coincident points, so every
closed form below (LOO, augmented-dataset thresholds) is exact for the
jittered model.  Prediction at a design point short-circuits to the observed
value with zero standard deviation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.stats import qmc

JITTER_START = 1e-10
JITTER_MAX = 1e-6
VARIANCE_FLOOR = 1e-12
NEG_VARIANCE_TOL = 1e-10


class ConvergenceWarning(UserWarning):
    """Maximum likelihood optimization did not converge from any restart."""


class SingularGramError(np.linalg.LinAlgError):
    def __init__(self, msg, condition=None):
        super().__init__(msg)
        self.condition = condition


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray
    responses: np.ndarray
    domain: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        z = np.asarray(self.responses, dtype=float).ravel()
        dom = np.asarray(self.domain, dtype=float).reshape(-1, 2)
        if pts.shape[0] != z.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {z.shape[0]} responses")
        if pts.shape[0] < 2:
            raise ValueError("need at least 2 design points")
        if dom.shape[0] != pts.shape[1]:
            raise ValueError("domain dimension does not match points")
        if np.any(pts < dom[:, 0]) or np.any(pts > dom[:, 1]):
            raise ValueError("design points must lie inside the domain box")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValueError("design points must be pairwise distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "responses", z)
        object.__setattr__(self, "domain", dom)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.points[idx], self.responses[idx], self.domain)


@dataclass(frozen=True)
class KernelParams:
    """Constant mean, variance, per-dimension lengthscales and regularity p (nu = p + 1/2)."""

    mean: float
    variance: float
    lengthscales: np.ndarray
    regularity: int = 2

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if np.any(rho <= 0):
            raise ValueError("lengthscales must be positive")
        if int(self.regularity) != self.regularity or self.regularity < 0:
            raise ValueError("regularity must be a non-negative integer")
        object.__setattr__(self, "lengthscales", rho)
        object.__setattr__(self, "regularity", int(self.regularity))
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    sd: np.ndarray


def _matern_poly_coeffs(p: int) -> np.ndarray:
    # kappa_{p+1/2}(h) = exp(-s) * p!/(2p)! * sum_i (p+i)!/(i!(p-i)!) (2s)^(p-i),  s = sqrt(2p+1) h
    scale = math.factorial(p) / math.factorial(2 * p)
    return np.array(
        [scale * math.factorial(p + i) / (math.factorial(i) * math.factorial(p - i)) * 2.0 ** (p - i)
         for i in range(p + 1)]
    )


def matern_correlation(h, regularity: int) -> np.ndarray:
    """Half-integer Matérn correlation as a function of the scaled distance ``h``."""
    h = np.asarray(h, dtype=float)
    p = int(regularity)
    s = math.sqrt(2 * p + 1) * h
    coeffs = _matern_poly_coeffs(p)
    poly = np.zeros_like(s)
    for i, c in enumerate(coeffs):
        poly = poly + c * s ** (p - i)
    return np.exp(-s) * poly


def _cross_cov(x, y, params: KernelParams) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    rho = params.lengthscales
    if x.shape[1] != rho.size or y.shape[1] != rho.size:
        raise ValueError("dimension mismatch between points and lengthscales")
    # exact differences keep k(x, y) == k(y, x) bit for bit
    diff = (x[:, None, :] - y[None, :, :]) / rho
    h = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return params.variance * matern_correlation(h, params.regularity)


def matern_kernel(x, y, params: KernelParams) -> float:
    """Covariance between two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.size != params.lengthscales.size:
        raise ValueError("dimension mismatch between x, y and lengthscales")
    h = math.sqrt(float(np.sum(((x - y) / params.lengthscales) ** 2)))
    return float(params.variance * matern_correlation(h, params.regularity))


def _cholesky_with_jitter(K: np.ndarray, scale: float, start: float = JITTER_START):
    """Cholesky of K + eps*scale*I, escalating eps x10 up to JITTER_MAX."""
    eps = start
    n = K.shape[0]
    while eps <= JITTER_MAX * (1 + 1e-9):
        try:
            L = linalg.cholesky(K + eps * scale * np.eye(n), lower=True)
            return L, eps
        except linalg.LinAlgError:
            eps *= 10.0
    cond = np.linalg.cond(K)
    raise SingularGramError(f"Gram matrix numerically singular (cond ~ {cond:.3g})", condition=cond)


@dataclass(frozen=True, eq=False)
class FittedGP:
    """Dataset + fixed hyperparameters with the precomputed factorization."""

    dataset: Dataset
    params: KernelParams
    chol: np.ndarray
    alpha: np.ndarray
    diag_inv: np.ndarray
    jitter: float
    inv: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def nugget(self) -> float:
        return self.jitter * self.params.variance

    def solve(self, b: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.chol, True), b)

    def cross_cov(self, x) -> np.ndarray:
        """k(X_i, x) for all design points, shape (n, m)."""
        return _cross_cov(self.dataset.points, x, self.params)


def build_gp(dataset: Dataset, params: KernelParams, jitter: float | None = None) -> FittedGP:
    """Factorize the Gram matrix for fixed hyperparameters.

    ``jitter`` fixes the relative nugget; by default it starts at 1e-10 and
    escalates on Cholesky failure.
    """
    if dataset.dim != params.lengthscales.size:
        raise ValueError("dimension mismatch between dataset and lengthscales")
    K = _cross_cov(dataset.points, dataset.points, params)
    if jitter is None:
        L, eps = _cholesky_with_jitter(K, params.variance)
    else:
        eps = float(jitter)
        L = linalg.cholesky(K + eps * params.variance * np.eye(dataset.n), lower=True)
    zc = dataset.responses - params.mean
    alpha = linalg.cho_solve((L, True), zc)
    Linv = linalg.solve_triangular(L, np.eye(dataset.n), lower=True)
    inv = Linv.T @ Linv
    diag_inv = np.einsum("ij,ij->j", Linv, Linv)
    if np.any(diag_inv <= 0):
        raise SingularGramError("non-positive diagonal of the inverse Gram matrix")
    return FittedGP(dataset, params, L, alpha, diag_inv, eps, inv)


def _coincident_index(gp: FittedGP, x: np.ndarray) -> np.ndarray:
    """Index of the design point equal to each row of x, or -1."""
    pts = gp.dataset.points
    eq = np.all(x[:, None, :] == pts[None, :, :], axis=2)
    hit = eq.any(axis=1)
    return np.where(hit, eq.argmax(axis=1), -1)


def _as_points(gp: FittedGP, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != gp.dataset.dim:
        raise ValueError(f"expected points of dimension {gp.dataset.dim}, got {x.shape[1]}")
    return x


def predict(gp: FittedGP, x, return_solves: bool = False):
    """Posterior mean and sd at the rows of ``x`` (shape (m, d) or (d,)).

    With ``return_solves`` also returns ``u = K^-1 k_*`` (n, m) and the
    posterior variance ``v`` including the nugget, as used by the conformal
    thresholds.
    """
    x = _as_points(gp, x)
    kx = gp.cross_cov(x)
    u = gp.solve(kx)
    mean = gp.params.mean + kx.T @ gp.alpha
    s2 = gp.params.variance
    v = s2 + gp.nugget - np.einsum("ij,ij->j", kx, u)
    if np.any(v < -NEG_VARIANCE_TOL * s2):
        raise FloatingPointError(f"negative posterior variance {v.min():.3g}")
    v = np.maximum(v, 0.0)
    sd = np.sqrt(v)
    idx = _coincident_index(gp, x)
    on_design = idx >= 0
    if on_design.any():
        mean = mean.copy()
        mean[on_design] = gp.dataset.responses[idx[on_design]]
        sd[on_design] = 0.0
    if return_solves:
        return Posterior(mean, sd), u, v, on_design
    return Posterior(mean, sd)


def posterior(gp: FittedGP, x) -> Posterior:
    """Posterior at a single point (scalars) or a batch of points (arrays)."""
    x_arr = np.asarray(x, dtype=float)
    post = predict(gp, x_arr)
    if x_arr.ndim == 1:
        return Posterior(float(post.mean[0]), float(post.sd[0]))
    return post


def loo_predictions(gp: FittedGP):
    """Closed-form delete-one means and sds at each design point."""
    z = gp.dataset.responses
    sd = 1.0 / np.sqrt(gp.diag_inv)
    mean = z - gp.alpha / gp.diag_inv
    return mean, sd


def loo_residuals(gp: FittedGP) -> np.ndarray:
    """Standardized LOO residuals (Z_i - m_{n,-i}(X_i)) / sigma_{n,-i}(X_i), without refitting."""
    if gp.n < 3:
        raise ValueError("LOO residuals need n >= 3")
    return gp.alpha / np.sqrt(gp.diag_inv)


def loo_predictions_at(gp: FittedGP, x):
    """Delete-one posterior means and sds at new points, shapes (n, m).

    m_{-i}(x) = m_n(x) - u_i a_i / Q_ii and s^2_{-i}(x) = s^2_n(x) + u_i^2 / Q_ii
    with Q the inverse Gram matrix, a = Q z_c and u = Q k_*.
    """
    post, u, v, _ = predict(gp, x, return_solves=True)
    q = gp.diag_inv[:, None]
    mean = post.mean[None, :] - u * gp.alpha[:, None] / q
    var = v[None, :] + u * u / q
    return mean, np.sqrt(var)


# ---------------------------------------------------------------- likelihood


def _profile_nll(log_rho, X, z, regularity, var_floor):
    rho = np.exp(log_rho)
    R = _cross_cov(X, X, KernelParams(0.0, 1.0, rho, regularity))
    try:
        L, _ = _cholesky_with_jitter(R, 1.0)
    except SingularGramError:
        return np.inf, None
    ones = np.ones_like(z)
    Ri1 = linalg.cho_solve((L, True), ones)
    Riz = linalg.cho_solve((L, True), z)
    mean = float(ones @ Riz / (ones @ Ri1))
    zc = z - mean
    s2 = float(zc @ linalg.cho_solve((L, True), zc)) / z.size
    s2 = max(s2, var_floor)
    nll = 0.5 * z.size * math.log(s2) + float(np.log(np.diag(L)).sum())
    return nll, (mean, s2)


def fit_ml(dataset: Dataset, regularity: int = 2, seed=None, restarts: int = 8) -> KernelParams:
    """Maximum likelihood hyperparameters with mean and variance profiled out.

    Log-lengthscales are optimized by Nelder-Mead from ``restarts`` Latin
    hypercube starts over [log(0.05 range), log(2 range)] per dimension.
    Emits :class:`ConvergenceWarning` and returns the best evaluated point
    if no restart converges.
    """
    X, z = dataset.points, dataset.responses
    ranges = dataset.domain[:, 1] - dataset.domain[:, 0]
    lo, hi = np.log(0.05 * ranges), np.log(2.0 * ranges)
    box_lo, box_hi = np.log(1e-3 * ranges), np.log(1e2 * ranges)
    zvar = float(np.var(z))
    # absolute fallback keeps the floor positive for constant responses
    var_floor = VARIANCE_FLOOR * (zvar if zvar > 0 else max(1.0, float(np.mean(z)) ** 2))

    def objective(t):
        if np.any(t < box_lo) or np.any(t > box_hi):
            return np.inf
        return _profile_nll(t, X, z, regularity, var_floor)[0]

    sampler = qmc.LatinHypercube(d=dataset.dim, seed=np.random.default_rng(seed))
    starts = qmc.scale(sampler.random(restarts), lo, hi)
    best_t, best_f, converged = None, np.inf, False
    for t0 in starts:
        res = optimize.minimize(
            objective, t0, method="Nelder-Mead",
            options={"xatol": 1e-4, "fatol": 1e-8, "maxiter": 400 * dataset.dim},
        )
        converged |= bool(res.success) and np.isfinite(res.fun)
        if res.fun < best_f:
            best_t, best_f = res.x, res.fun
    if best_t is None:
        best_t = starts[0]
    if not converged:
        warnings.warn("maximum likelihood did not converge; returning best point", ConvergenceWarning)
    nll, extra = _profile_nll(best_t, X, z, regularity, var_floor)
    if extra is None:
        mean, s2 = float(np.mean(z)), max(zvar, var_floor)
    else:
        mean, s2 = extra
    return KernelParams(mean, s2, np.exp(best_t), regularity)


def sample_prior(points, params: KernelParams, rng, size=None) -> np.ndarray:
    """Draw GP prior values at ``points`` (used for simulation studies)."""
    K = _cross_cov(points, points, params)
    L, _ = _cholesky_with_jitter(K, params.variance)
    shape = (points.shape[0],) if size is None else (size, points.shape[0])
    e = rng.standard_normal(shape)
    return params.mean + e @ L.T
