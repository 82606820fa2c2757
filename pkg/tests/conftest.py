import numpy as np
import pytest

from calibgp.gp_core import Dataset, KernelParams, build_gp

from oracles import gram_condition

_ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Log one acceptance line; the lines are echoed in the terminal summary."""

    def record(number, title, ok, detail):
        _ACCEPTANCE.append((number, title, bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")


def random_gp(rng, d_max=3, n_min=4, n_max=15, cond_max=1e6, with_test_point=True):
    """Random GP instance whose (augmented) Gram matrix is well conditioned.

    Dense-inverse oracles lose accuracy in proportion to the condition
    number, so instances are redrawn until it stays below ``cond_max``.
    """
    while True:
        d = int(rng.integers(1, d_max + 1))
        n = int(rng.integers(n_min, n_max + 1))
        X = rng.random((n, d))
        x = rng.random(d)
        params = KernelParams(rng.normal(), rng.uniform(0.5, 2.0), rng.uniform(0.2, 1.0, d),
                              int(rng.integers(0, 3)))
        gp = build_gp(Dataset(X, rng.normal(size=n), np.tile([0.0, 1.0], (d, 1))), params)
        pts = np.vstack([X, x]) if with_test_point else X
        if gram_condition(pts, params, gp.nugget) < cond_max:
            return gp, x
