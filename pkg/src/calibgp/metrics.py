"""Predictive distributions over a batch of test points and calibration metrics.

Every predictive object describes ``m`` scalar laws at once, one per test
point.  Evaluators take ``z`` broadcastable to ``(m,)`` and return arrays of
the broadcast shape.  Scoring uses

    CRPS(F, z)  = E|Z - z| - E|Z - Z'| / 2
    SCRPS(F, z) = -E|Z - z| / E|Z - Z'| - log(E|Z - Z'|) / 2

so both only need ``expected_abs_error`` and ``dispersion``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import gn

# Probability comparisons in generalized inverses tolerate this much rounding.
PROB_TOL = 1e-12

# Interior alpha grid for the integrated coverage error.
IAE_GRID_SIZE = 201


def _as_float(a):
    return np.asarray(a, dtype=float)


class Predictive:
    """Base class for a batch of ``m`` predictive laws.

    Subclasses implement ``cdf``, ``left_cdf``, ``quantile``, ``sample``,
    ``expected_abs_error`` and ``dispersion``.  ``closed_intervals`` states
    whether central intervals include their upper endpoint.
    """

    kind = "abstract"
    closed_intervals = True

    @property
    def size(self) -> int:
        raise NotImplementedError

    def cdf(self, z):
        raise NotImplementedError

    def left_cdf(self, z):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def sample(self, rng):
        """One draw per test point."""
        raise NotImplementedError

    def expected_abs_error(self, z):
        raise NotImplementedError

    def dispersion(self):
        raise NotImplementedError

    def pit_bracket(self, z):
        """Left and right limits ``(F(z-), F(z))`` of the law at ``z``.

        Infinite ``z`` is allowed and follows the conventions ``F(-inf-) = 0``
        and ``F(+inf) = 1``.
        """
        return self.left_cdf(z), self.cdf(z)

    def interval(self, level: float):
        """Central interval ``(F^-1(alpha/2), F^-1(1 - alpha/2))``."""
        if not 0.0 < level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {level}")
        alpha = 1.0 - level
        return self.quantile(alpha / 2.0), self.quantile(1.0 - alpha / 2.0)

    def median(self):
        return self.quantile(0.5)


# ----------------------------------------------------------------- smooth laws


class NormalLaw:
    """Standard normal law used by location-scale predictives."""

    unit_dispersion = 2.0 / np.sqrt(np.pi)

    def cdf(self, u):
        return special.ndtr(u)

    def quantile(self, p):
        return special.ndtri(p)

    def sample(self, rng, size):
        return rng.standard_normal(size)

    def expected_abs(self, u):
        """E|U - u| = u (2 Phi(u) - 1) + 2 phi(u)."""
        return u * (2.0 * special.ndtr(u) - 1.0) + 2.0 * stats.norm.pdf(u)


class GNLaw:
    """Centered generalized normal law GN(shape, 0, scale)."""

    def __init__(self, shape: float, scale: float):
        self.params = gn.GNParams(float(shape), float(scale))

    @property
    def unit_dispersion(self) -> float:
        # table lookup; raises for shapes outside the tabulated range
        return float(gn.dispersion(self.params.shape, self.params.scale))

    def cdf(self, u):
        return gn.cdf(u, self.params.shape, self.params.scale)

    def quantile(self, p):
        return gn.quantile(p, self.params.shape, self.params.scale)

    def sample(self, rng, size):
        return gn.sample(self.params, rng, size)

    def expected_abs(self, u):
        return gn.expected_abs_deviation(u, self.params.shape, self.params.scale)


class LocationScalePredictive(Predictive):
    """Laws ``mean + sd * U`` for a fixed standard law ``U``.

    Points with ``sd == 0`` are Dirac masses at ``mean``.
    """

    kind = "smooth"

    def __init__(self, mean, sd, law):
        mean = np.atleast_1d(_as_float(mean))
        sd = np.atleast_1d(_as_float(sd))
        if mean.shape != sd.shape or mean.ndim != 1:
            raise ValueError("mean and sd must be 1-D arrays of equal length")
        if np.any(sd < 0) or not np.all(np.isfinite(mean)):
            raise ValueError("sd must be nonnegative and mean finite")
        self.mean = mean
        self.sd = sd
        self.law = law
        self._dirac = sd == 0.0

    @property
    def size(self) -> int:
        return self.mean.size

    def _u(self, z):
        return (_as_float(z) - self.mean) / np.where(self._dirac, 1.0, self.sd)

    def cdf(self, z):
        z = _as_float(z)
        with np.errstate(invalid="ignore"):
            out = self.law.cdf(self._u(z))
        return np.where(self._dirac, (z >= self.mean).astype(float), out)

    def left_cdf(self, z):
        z = _as_float(z)
        with np.errstate(invalid="ignore"):
            out = self.law.cdf(self._u(z))
        return np.where(self._dirac, (z > self.mean).astype(float), out)

    def quantile(self, p):
        p = _as_float(p)
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("quantile argument must lie in (0, 1)")
        return self.mean + self.sd * self.law.quantile(p)

    def sample(self, rng):
        return self.mean + self.sd * self.law.sample(rng, self.size)

    def expected_abs_error(self, z):
        z = _as_float(z)
        return np.where(self._dirac, np.abs(z - self.mean), self.sd * self.law.expected_abs(self._u(z)))

    def dispersion(self):
        return self.sd * self.law.unit_dispersion


class GaussianPredictive(LocationScalePredictive):
    """Gaussian laws N(mean, sd^2), e.g. a GP posterior."""

    def __init__(self, mean, sd):
        super().__init__(mean, sd, NormalLaw())


class DiracPredictive(Predictive):
    """Point masses at ``value``."""

    kind = "dirac"

    def __init__(self, value):
        self.value = np.atleast_1d(_as_float(value))

    @property
    def size(self) -> int:
        return self.value.size

    def cdf(self, z):
        return (_as_float(z) >= self.value).astype(float)

    def left_cdf(self, z):
        return (_as_float(z) > self.value).astype(float)

    def quantile(self, p):
        p = _as_float(p)
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("quantile argument must lie in (0, 1)")
        return np.broadcast_to(self.value, np.broadcast(p, self.value).shape).copy()

    def sample(self, rng):
        return self.value.copy()

    def expected_abs_error(self, z):
        return np.abs(_as_float(z) - self.value)

    def dispersion(self):
        return np.zeros_like(self.value)


class DiscretePredictive(Predictive):
    """Finitely supported laws: row ``j`` puts mass ``weights[j, k]`` on ``atoms[j, k]``.

    Atoms must be finite; rows are sorted internally.
    """

    kind = "empirical"

    def __init__(self, atoms, weights=None):
        atoms = np.atleast_2d(_as_float(atoms))
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if weights is None:
            weights = np.full(atoms.shape, 1.0 / atoms.shape[1])
        weights = np.broadcast_to(_as_float(weights), atoms.shape)
        if np.any(weights < 0) or not np.allclose(weights.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("weights must be nonnegative and sum to one per row")
        order = np.argsort(atoms, axis=1, kind="stable")
        self.atoms = np.take_along_axis(atoms, order, axis=1)
        self.weights = np.take_along_axis(weights, order, axis=1)
        self._cum = np.cumsum(self.weights, axis=1)

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def _mass(self, z, strict):
        z = _as_float(z)[..., None]
        mask = self.atoms < z if strict else self.atoms <= z
        return np.minimum((self.weights * mask).sum(axis=-1), 1.0)

    def cdf(self, z):
        return self._mass(z, strict=False)

    def left_cdf(self, z):
        return self._mass(z, strict=True)

    def quantile(self, p):
        p = _as_float(p)
        if np.any((p <= 0) | (p >= 1)):
            raise ValueError("quantile argument must lie in (0, 1)")
        p = np.broadcast_to(p, (self.size,))
        k = (self._cum < (p[:, None] - PROB_TOL)).sum(axis=1)
        k = np.minimum(k, self.atoms.shape[1] - 1)
        return self.atoms[np.arange(self.size), k]

    def sample(self, rng):
        u = rng.random(self.size)
        k = (self._cum < u[:, None]).sum(axis=1)
        k = np.minimum(k, self.atoms.shape[1] - 1)
        return self.atoms[np.arange(self.size), k]

    def expected_abs_error(self, z):
        z = _as_float(z)[..., None]
        return (self.weights * np.abs(self.atoms - z)).sum(axis=-1)

    def dispersion(self):
        """E|Z - Z'| = 2 sum_k w_k x_k (W_{<k} - W_{>k}) for sorted atoms."""
        below = self._cum - self.weights
        above = 1.0 - self._cum
        return np.maximum(2.0 * (self.weights * self.atoms * (below - above)).sum(axis=1), 0.0)


class EmpiricalPredictive(DiscretePredictive):
    """Equally weighted samples per test point, shape (m, K)."""

    def __init__(self, samples):
        super().__init__(samples, None)


# --------------------------------------------------------------------- metrics


@dataclass(frozen=True)
class PitSample:
    values: np.ndarray
    randomized: bool
    seed: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.any((v < 0) | (v > 1)):
            raise ValueError("PIT values must lie in [0, 1]")


def pit_values(pred: Predictive, truths, seed=None, tau=None) -> PitSample:
    """Randomized PIT ``U = F(z-) + tau (F(z) - F(z-))``.

    ``tau`` defaults to i.i.d. uniforms from ``seed``; it only matters where
    the law has an atom at the truth.
    """
    truths = np.atleast_1d(_as_float(truths))
    if truths.shape != (pred.size,):
        raise ValueError("need one truth per predictive")
    lo, hi = pred.pit_bracket(truths)
    if tau is None:
        tau = np.random.default_rng(seed).random(pred.size)
    u = np.clip(lo + np.asarray(tau) * (hi - lo), 0.0, 1.0)
    return PitSample(u, randomized=bool(np.any(hi > lo)), seed=seed)


def ks_pit(pit) -> float:
    """Kolmogorov distance between the empirical PIT law and U(0, 1)."""
    u = np.sort(_as_float(getattr(pit, "values", pit)))
    m = u.size
    if m == 0:
        raise ValueError("empty PIT sample")
    j = np.arange(1, m + 1)
    return float(max(np.max(np.abs(u - (j - 1) / m)), np.max(np.abs(u - j / m))))


def var_pit(pit) -> float:
    """Mean squared deviation of the PIT from 1/2, minus 1/12."""
    u = _as_float(getattr(pit, "values", pit))
    return float(np.mean((u - 0.5) ** 2) - 1.0 / 12.0)


def _covered(pred: Predictive, lo, hi, truths):
    if pred.closed_intervals:
        return (truths >= lo) & (truths <= hi)
    return (truths >= lo) & (truths < hi)


@dataclass(frozen=True)
class LevelCoverage:
    level: float
    coverage: float
    mean_width: float
    infinite_count: int
    widths: np.ndarray = field(repr=False, compare=False)


def coverage_and_width(pred: Predictive, truths, levels) -> list[LevelCoverage]:
    """Empirical coverage and mean width of central intervals per level.

    Infinite intervals count toward coverage but are left out of the mean
    width; their number is reported.  ``widths`` holds per-point widths
    (``inf`` for unbounded intervals).
    """
    truths = np.atleast_1d(_as_float(truths))
    out = []
    for level in levels:
        lo, hi = pred.interval(level)
        widths = hi - lo
        finite = np.isfinite(widths)
        mean_width = float(np.mean(widths[finite])) if finite.any() else float("inf")
        cov = float(np.mean(_covered(pred, lo, hi, truths)))
        out.append(LevelCoverage(float(level), cov, mean_width, int((~finite).sum()), widths))
    return out


def coverage_curve(pred: Predictive, truths, alphas) -> np.ndarray:
    truths = np.atleast_1d(_as_float(truths))
    return np.array([np.mean(_covered(pred, *pred.interval(1.0 - a), truths)) for a in alphas])


def iae_grid(size: int = IAE_GRID_SIZE) -> np.ndarray:
    """Equally spaced interior alphas, endpoints excluded."""
    return np.linspace(0.0, 1.0, size + 2)[1:-1]


def iae(pred: Predictive, truths, grid_size: int = IAE_GRID_SIZE) -> float:
    """Integral over alpha in (0, 1) of |coverage(1 - alpha) - (1 - alpha)|.

    Trapezoid rule on the interior grid, extended by constants to 0 and 1.
    """
    alphas = iae_grid(grid_size)
    err = np.abs(coverage_curve(pred, truths, alphas) - (1.0 - alphas))
    x = np.concatenate([[0.0], alphas, [1.0]])
    y = np.concatenate([[err[0]], err, [err[-1]]])
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def crps(pred: Predictive, z):
    return pred.expected_abs_error(z) - 0.5 * pred.dispersion()


def scrps(pred: Predictive, z):
    disp = pred.dispersion()
    if np.any(disp <= 0):
        raise ValueError("SCRPS undefined for a degenerate (zero-dispersion) law")
    return -pred.expected_abs_error(z) / disp - 0.5 * np.log(disp)


def rmse(means, truths) -> float:
    means = _as_float(means)
    truths = _as_float(truths)
    if means.shape != truths.shape:
        raise ValueError("length mismatch")
    return float(np.sqrt(np.mean((means - truths) ** 2)))


@dataclass(frozen=True)
class MetricsReport:
    levels: tuple
    coverage: tuple
    mean_width: tuple
    infinite_count: tuple
    mean_rel_width: tuple
    ks_pit: float
    var_pit: float
    iae: float
    rmse: float
    crps: float
    scrps: float
    tail_clipped: bool = False


def evaluate(pred: Predictive, truths, levels, point_estimate=None, seed=None, tau=None,
             reference_widths=None):
    """Full metric report for one method on one test design.

    ``reference_widths`` maps level to per-point widths of a reference method;
    relative widths are ratios per test point averaged over finite ratios.
    Returns ``(report, {level: widths})``.
    """
    truths = np.atleast_1d(_as_float(truths))
    cover = coverage_and_width(pred, truths, levels)
    rel = []
    for c in cover:
        if reference_widths is None:
            rel.append(float("nan"))
            continue
        ratio = c.widths / reference_widths[c.level]
        ok = np.isfinite(ratio)
        rel.append(float(np.mean(ratio[ok])) if ok.any() else float("inf"))
    pit = pit_values(pred, truths, seed=seed, tau=tau)
    scored = pred.scoring_law() if hasattr(pred, "scoring_law") else pred
    if point_estimate is None:
        point_estimate = pred.median()
    report = MetricsReport(
        levels=tuple(float(l) for l in levels),
        coverage=tuple(c.coverage for c in cover),
        mean_width=tuple(c.mean_width for c in cover),
        infinite_count=tuple(c.infinite_count for c in cover),
        mean_rel_width=tuple(rel),
        ks_pit=ks_pit(pit),
        var_pit=var_pit(pit),
        iae=iae(pred, truths),
        rmse=rmse(point_estimate, truths),
        crps=float(np.mean(crps(scored, truths))),
        scrps=float(np.mean(scrps(scored, truths))),
        tail_clipped=scored is not pred,
    )
    return report, {c.level: c.widths for c in cover}
