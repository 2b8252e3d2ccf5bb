#!/usr/bin/env python3
"""Mass tracking over four parameter sets, four alphas each.

mass.csv records the trapezoid mass per level; run_meta.txt notes the max
drift. With pinned boundary values the drift is the fractionally integrated
boundary flux of the chemical potential, so it is small but not zero.
"""

import sys

from tfch.cli import main

SETS = [
    ("0.01", "0.1", "60", "200"),
    ("0.01", "0.1", "100", "200"),
    ("0.01", "0.1", "60", "100"),
    ("0.01", "0.5", "60", "200"),
]

if __name__ == "__main__":
    extra = sys.argv[1:]
    rc = 0
    for i, (kappa, eps, M, N) in enumerate(SETS, 1):
        for alpha in ("0.2", "0.4", "0.6", "0.8"):
            out = "results/mass_check/set%d_alpha_%s" % (i, alpha)
            rc = main(["tfch-run", "--alpha", alpha, "--N", N, "--M", M,
                       "--kappa", kappa, "--epsilon", eps,
                       "--out", out] + extra)
            if rc != 0:
                sys.exit(rc)
    sys.exit(rc)
