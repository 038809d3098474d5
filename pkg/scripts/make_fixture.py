#!/usr/bin/env python3
"""Regenerate the shipped synthetic returns fixture.

Three assets, two slow-moving predictive features, and a volatility
regime, all from a fixed seed. Returns are decimal fractions per period.
The CSV stores contemporaneous rows; consumers lag features themselves.
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from portinf.harness import write_csv  # noqa: E402

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "synthetic_returns.csv"
SEED = 20240901
T = 360


def main():
    rng = np.random.default_rng(SEED)
    # slow AR(1) features, a valuation-style level and a momentum-style delta
    f = np.zeros((T, 2))
    for t in range(1, T):
        f[t, 0] = 0.97 * f[t - 1, 0] + 0.05 * rng.standard_normal()
        f[t, 1] = 0.80 * f[t - 1, 1] + 0.10 * rng.standard_normal()
    # volatility regime: log-AR(1), applied to next-period returns
    logv = np.zeros(T)
    for t in range(1, T):
        logv[t] = 0.9 * logv[t - 1] + 0.25 * rng.standard_normal()
    vol = 0.03 * np.exp(0.5 * logv)

    bmat = np.array([[0.020, 0.008], [0.006, -0.010], [-0.004, 0.012]])
    corr = np.array([[1.0, 0.35, 0.15], [0.35, 1.0, 0.25], [0.15, 0.25, 1.0]])
    cf = np.linalg.cholesky(corr)
    mu0 = np.array([0.006, 0.004, 0.002])

    x = np.empty((T, 3))
    for t in range(T):
        fprev = f[t - 1] if t > 0 else np.zeros(2)
        shock = cf @ rng.standard_normal(3)
        x[t] = mu0 + bmat @ fprev + vol[t] * shock

    dates = [f"{1995 + m // 12:04d}-{m % 12 + 1:02d}-01" for m in range(T)]
    values = np.column_stack([x, f])
    OUT.parent.mkdir(parents=True, exist_ok=True)
    write_csv(str(OUT), values, ["alpha", "beta", "gamma", "level", "delta"], dates)
    print(f"wrote {OUT} ({T} rows)")


if __name__ == "__main__":
    main()
