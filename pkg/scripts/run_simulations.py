#!/usr/bin/env python3
"""Run every Monte Carlo validation suite and print the combined report.

Usage: python scripts/run_simulations.py [--seed S] [--quick]

--quick shrinks trial counts for a fast smoke run; default sizes match
the acceptance tolerances.
"""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from portinf import simulate  # noqa: E402


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()

    trials = {"theorem1": 1000, "gaussian": 1000, "lrt": 400, "mglh": 1000} \
        if args.quick else {}
    failed = False
    for suite in simulate.SUITES:
        t0 = time.time()
        rep = simulate.simulate_suite(suite, args.seed, trials.get(suite))
        print(rep.render(), end="")
        print(f"elapsed={time.time() - t0:.1f}s\n")
        failed = failed or not rep.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
