#!/usr/bin/env python3
"""Joint-distribution validation of the Gibbs kernels.

Compares iid prior/data simulation against the Gibbs-plus-resimulation chain
on a small fixed instance and prints two-sample z-scores per test function.
"""

import argparse
import time

from smogcast.validation import run_geweke


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=20_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--stations", type=int, default=3)
    parser.add_argument("--hours", type=int, default=24)
    parser.add_argument("--variant", default="homoscedastic")
    parser.add_argument("--bound", type=float, default=4.0)
    args = parser.parse_args()

    t0 = time.time()
    res = run_geweke(
        n_iterations=args.iterations,
        seed=args.seed,
        n_stations=args.stations,
        n_hours=args.hours,
        variant=args.variant,
    )
    print(res.summary())
    verdict = "PASS" if res.passed(args.bound) else "FAIL"
    print(f"\nmax |z| = {res.max_abs_z():.2f} (bound {args.bound}): {verdict}  [{time.time() - t0:.0f}s]")


if __name__ == "__main__":
    main()
