"""Deterministic test functions on boxes and uniform design sampling.

Names with a trailing integer fix the dimension of a dimension-generic
family, e.g. ``rosenbrock6`` or ``dixon_price4``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Hartmann-3 parameters, as printed.
HARTMANN3_A = np.array([
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
])
HARTMANN3_C = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN3_P = 1e-1 * np.array([
    [1, 1, 1],
    [3, 3, 3],
    [5, 5, 5],
    [7, 7, 7],
], dtype=float)

# Hartmann-6 parameters; the location matrix is scaled by 1e-4 so that the
# centers lie in the unit cube.
HARTMANN6_A = np.array([
    [10, 3, 17, 3.5, 1.7, 8],
    [0.05, 10, 17, 0.1, 8, 14],
    [3, 3.5, 1.7, 10, 17, 8],
    [17, 8, 0.05, 10, 0.1, 14],
])
HARTMANN6_C = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN6_P_INT = np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])
HARTMANN6_P = 1e-4 * HARTMANN6_P_INT

ACKLEY_HALF_WIDTH = 32.168


def _branin(x):
    x1, x2 = x[:, 0], x[:, 1]
    return (
        (x2 - 5.1 / (4 * np.pi**2) * x1**2 + 5 / np.pi * x1 - 6) ** 2
        + 10 * (1 - 1 / (8 * np.pi)) * np.cos(x1)
        + 10
    )


def _goldstein_price(x):
    x1, x2 = x[:, 0], x[:, 1]
    a = 1 + (x1 + x2 + 1) ** 2 * (19 - 14 * x1 + 3 * x1**2 - 14 * x2 + 6 * x1 * x2 + 3 * x2**2)
    b = 30 + (2 * x1 - 3 * x2) ** 2 * (18 - 32 * x1 + 12 * x1**2 + 48 * x2 - 36 * x1 * x2 + 27 * x2**2)
    return a * b


def _rosenbrock(x):
    return np.sum(100 * (x[:, 1:] - x[:, :-1] ** 2) ** 2 + (x[:, :-1] - 1) ** 2, axis=1)


def _ackley(x):
    # cos(pi x), not the more common cos(2 pi x)
    d = x.shape[1]
    return (
        -20 * np.exp(-0.2 * np.sqrt(np.sum(x**2, axis=1) / d))
        - np.exp(np.sum(np.cos(np.pi * x), axis=1) / d)
        + 20
        + np.e
    )


def _beale(x):
    x1, x2 = x[:, 0], x[:, 1]
    return (1.5 - x1 + x1 * x2) ** 2 + (2.25 - x1 + x1 * x2**2) ** 2 + (2.625 - x1 + x1 * x2**3) ** 2


def _dixon_price(x):
    i = np.arange(2, x.shape[1] + 1)
    return (x[:, 0] - 1) ** 2 + np.sum(i * (2 * x[:, 1:] ** 2 - x[:, :-1]) ** 2, axis=1)


def _hartmann(a, c, p):
    def f(x):
        inner = np.sum(a[None, :, :] * (x[:, None, :] - p[None, :, :]) ** 2, axis=2)
        return -np.sum(c * np.exp(-inner), axis=1)

    return f


@dataclass(frozen=True)
class TestFunction:
    name: str
    dim: int
    domain: np.ndarray
    evaluator: Callable

    __test__ = False  # not a pytest class

    def __call__(self, x):
        return eval_points(self, x)


_FIXED = {
    "branin": (2, [[-5.0, 10.0], [0.0, 15.0]], _branin),
    "goldstein_price": (2, [[-2.0, 2.0]] * 2, _goldstein_price),
    "beale": (2, [[-4.5, 4.5]] * 2, _beale),
    "hartmann3": (3, [[0.0, 1.0]] * 3, _hartmann(HARTMANN3_A, HARTMANN3_C, HARTMANN3_P)),
    "hartmann6": (6, [[0.0, 1.0]] * 6, _hartmann(HARTMANN6_A, HARTMANN6_C, HARTMANN6_P)),
}

_FAMILIES = {
    "rosenbrock": ((-5.0, 10.0), _rosenbrock, 2),
    "ackley": ((-ACKLEY_HALF_WIDTH, ACKLEY_HALF_WIDTH), _ackley, 1),
    "dixon_price": ((-10.0, 10.0), _dixon_price, 2),
}


def get_function(name: str) -> TestFunction:
    """Look up a function by name, e.g. ``"goldstein_price"`` or ``"ackley4"``."""
    key = name.lower().replace("-", "_")
    if key in _FIXED:
        d, dom, f = _FIXED[key]
        return TestFunction(key, d, np.array(dom), f)
    m = re.fullmatch(r"([a-z_]+?)_?(\d+)", key)
    if m and m.group(1) in _FAMILIES:
        (lo, hi), f, dmin = _FAMILIES[m.group(1)]
        d = int(m.group(2))
        if d < dmin:
            raise ValueError(f"{m.group(1)} needs dimension >= {dmin}")
        return TestFunction(f"{m.group(1)}{d}", d, np.tile([lo, hi], (d, 1)), f)
    raise KeyError(f"unknown test function {name!r}")


def available_functions() -> list[str]:
    return sorted(_FIXED) + [f"{k}<d>" for k in sorted(_FAMILIES)]


def eval_points(fn: TestFunction, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != fn.dim:
        raise ValueError(f"{fn.name} expects {fn.dim} coordinates, got {x.shape[1]}")
    if np.any(x < fn.domain[:, 0]) or np.any(x > fn.domain[:, 1]):
        raise ValueError(f"point outside the domain of {fn.name}")
    y = fn.evaluator(x)
    return float(y[0]) if single else y


def eval_function(name: str, x):
    return eval_points(get_function(name), x)


def sample_design(domain, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. uniform points in the box ``domain`` (shape (d, 2))."""
    domain = np.asarray(domain, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random((n, domain.shape[0]))
    return domain[:, 0] + u * (domain[:, 1] - domain[:, 0])
