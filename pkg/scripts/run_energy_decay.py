#!/usr/bin/env python3
"""Energy decay runs: one tfch-run per alpha, each into its own directory.

energy.csv holds the free and modified energies per level; the modified
column is the one with the monotone-decay guarantee.
"""

import sys

from tfch.cli import main

if __name__ == "__main__":
    extra = sys.argv[1:]
    rc = 0
    for alpha in ("0.2", "0.4", "0.6", "0.8"):
        rc = main(["tfch-run", "--alpha", alpha,
                   "--N", "200", "--M", "60",
                   "--kappa", "0.01", "--epsilon", "0.1",
                   "--out", "results/energy_decay/alpha_%s" % alpha] + extra)
        if rc != 0:
            break
    sys.exit(rc)
