"""Tabulate E|U - U'| for U, U' ~ GN(beta, 0, 1) on 64 log-spaced beta nodes.

Writes src/calibgp/data/gn_dispersion.csv, read at runtime by
calibgp.gn.unit_dispersion.
"""

import csv
from pathlib import Path

import numpy as np

from calibgp.gn import DISPERSION_BETA_MAX, DISPERSION_BETA_MIN, unit_dispersion_quadrature

OUT = Path(__file__).resolve().parents[1] / "src" / "calibgp" / "data" / "gn_dispersion.csv"


def main():
    betas = np.geomspace(DISPERSION_BETA_MIN, DISPERSION_BETA_MAX, 64)
    with OUT.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta", "mean_abs_diff"])
        for b in betas:
            w.writerow([repr(float(b)), repr(unit_dispersion_quadrature(float(b)))])
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
